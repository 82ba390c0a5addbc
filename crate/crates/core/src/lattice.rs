//! Periodic L×L square lattice and integer link fields.
//!
//! Sites are numbered `i = y * L + x`. Every site owns two links, the one
//! pointing in +x and the one pointing in +y, and links are stored
//! site-major with the x-link first: link `2 * i` is `(i, x)` and link
//! `2 * i + 1` is `(i, y)`. Serialized fields use this order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];
}

/// One of the four nearest-neighbour steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    PlusX = 0,
    MinusX = 1,
    PlusY = 2,
    MinusY = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::PlusX, Direction::MinusX, Direction::PlusY, Direction::MinusY];

    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i & 3]
    }

    pub fn axis(self) -> Axis {
        match self {
            Direction::PlusX | Direction::MinusX => Axis::X,
            Direction::PlusY | Direction::MinusY => Axis::Y,
        }
    }

    /// +1 for steps along the link orientation, -1 against it.
    pub fn sign(self) -> i64 {
        match self {
            Direction::PlusX | Direction::PlusY => 1,
            Direction::MinusX | Direction::MinusY => -1,
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::PlusX => Direction::MinusX,
            Direction::MinusX => Direction::PlusX,
            Direction::PlusY => Direction::MinusY,
            Direction::MinusY => Direction::PlusY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    size: usize,
}

impl TorusLattice {
    pub fn new(size: usize) -> Result<Self> {
        // 2 L^2 must fit comfortably in the index types used by the kernels.
        if size == 0 || size > 1 << 14 {
            return Err(Error::InvalidSize(size));
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.size * self.size
    }

    #[inline]
    pub fn num_links(&self) -> usize {
        2 * self.num_sites()
    }

    #[inline]
    pub fn site(&self, x: usize, y: usize) -> usize {
        (y % self.size) * self.size + (x % self.size)
    }

    #[inline]
    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.size, site / self.size)
    }

    #[inline]
    pub fn link(&self, site: usize, axis: Axis) -> usize {
        2 * site + axis as usize
    }

    #[inline]
    pub fn link_endpoints(&self, link: usize) -> (usize, Axis) {
        let axis = if link & 1 == 0 { Axis::X } else { Axis::Y };
        (link / 2, axis)
    }

    /// Site reached from `site` by a single step.
    #[inline]
    pub fn neighbor(&self, site: usize, dir: Direction) -> usize {
        let l = self.size;
        let (x, y) = self.coords(site);
        match dir {
            Direction::PlusX => self.site(x + 1, y),
            Direction::MinusX => self.site(x + l - 1, y),
            Direction::PlusY => self.site(x, y + 1),
            Direction::MinusY => self.site(x, y + l - 1),
        }
    }

    /// The link traversed by a step from `site` in `dir`.
    #[inline]
    pub fn step_link(&self, site: usize, dir: Direction) -> usize {
        match dir {
            Direction::PlusX | Direction::PlusY => self.link(site, dir.axis()),
            Direction::MinusX | Direction::MinusY => self.link(self.neighbor(site, dir), dir.axis()),
        }
    }

    /// Links touching `site`: outgoing x, outgoing y, incoming x, incoming y.
    pub fn incident_links(&self, site: usize) -> [usize; 4] {
        [
            self.link(site, Axis::X),
            self.link(site, Axis::Y),
            self.link(self.neighbor(site, Direction::MinusX), Axis::X),
            self.link(self.neighbor(site, Direction::MinusY), Axis::Y),
        ]
    }

    /// Displacement `to - from`, each coordinate reduced into `0..L`.
    pub fn displacement(&self, from: usize, to: usize) -> (usize, usize) {
        let (fx, fy) = self.coords(from);
        let (tx, ty) = self.coords(to);
        let l = self.size;
        ((tx + l - fx) % l, (ty + l - fy) % l)
    }

    /// Shortest-path distance on the torus graph.
    pub fn graph_distance(&self, a: usize, b: usize) -> usize {
        let (dx, dy) = self.displacement(a, b);
        dx.min(self.size - dx) + dy.min(self.size - dy)
    }
}

/// Integer charge per site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syndrome {
    lattice: TorusLattice,
    charges: Vec<i64>,
}

impl Syndrome {
    pub fn zeros(lattice: TorusLattice) -> Self {
        Self { lattice, charges: vec![0; lattice.num_sites()] }
    }

    /// Builds a syndrome from raw charges; they must sum to zero.
    pub fn from_charges(lattice: TorusLattice, charges: Vec<i64>) -> Result<Self> {
        if charges.len() != lattice.num_sites() {
            return Err(Error::InvalidParameter(format!(
                "expected {} charges, got {}",
                lattice.num_sites(),
                charges.len()
            )));
        }
        let s = Self { lattice, charges };
        let total = s.total()?;
        if total != 0 {
            return Err(Error::UnbalancedSyndrome(total));
        }
        Ok(s)
    }

    pub fn lattice(&self) -> TorusLattice {
        self.lattice
    }

    pub fn charges(&self) -> &[i64] {
        &self.charges
    }

    pub fn charge(&self, site: usize) -> i64 {
        self.charges[site]
    }

    pub fn total(&self) -> Result<i64> {
        self.charges.iter().try_fold(0i64, |acc, &q| acc.checked_add(q)).ok_or(Error::Overflow("syndrome total"))
    }

    pub fn is_zero(&self) -> bool {
        self.charges.iter().all(|&q| q == 0)
    }

    /// Number of sites carrying nonzero charge.
    pub fn num_defects(&self) -> usize {
        self.charges.iter().filter(|&&q| q != 0).count()
    }

    pub fn checked_add(&self, other: &Syndrome) -> Result<Syndrome> {
        check_same(self.lattice, other.lattice)?;
        let charges = self
            .charges
            .iter()
            .zip(&other.charges)
            .map(|(a, b)| a.checked_add(*b).ok_or(Error::Overflow("syndrome add")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Syndrome { lattice: self.lattice, charges })
    }
}

/// Winding numbers as exact rationals with common denominator L.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Winding {
    pub numer_x: i64,
    pub numer_y: i64,
    pub denom: i64,
}

impl Winding {
    pub fn is_integral(&self) -> bool {
        self.numer_x % self.denom == 0 && self.numer_y % self.denom == 0
    }

    /// Integer winding pair, or `None` when the field is not divergenceless.
    pub fn as_integers(&self) -> Option<(i64, i64)> {
        self.is_integral().then(|| (self.numer_x / self.denom, self.numer_y / self.denom))
    }

    pub fn as_f64(&self) -> (f64, f64) {
        (self.numer_x as f64 / self.denom as f64, self.numer_y as f64 / self.denom as f64)
    }
}

/// Integer vector field on the links of a torus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LinkFieldRepr", into = "LinkFieldRepr")]
pub struct LinkField {
    lattice: TorusLattice,
    values: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct LinkFieldRepr {
    #[serde(rename = "L")]
    size: usize,
    values: Vec<i64>,
}

impl TryFrom<LinkFieldRepr> for LinkField {
    type Error = Error;

    fn try_from(r: LinkFieldRepr) -> Result<Self> {
        LinkField::from_values(TorusLattice::new(r.size)?, r.values)
    }
}

impl From<LinkField> for LinkFieldRepr {
    fn from(f: LinkField) -> Self {
        LinkFieldRepr { size: f.lattice.size(), values: f.values }
    }
}

fn check_same(a: TorusLattice, b: TorusLattice) -> Result<()> {
    if a != b {
        return Err(Error::LatticeMismatch(a.size(), b.size()));
    }
    Ok(())
}

impl LinkField {
    pub fn zeros(lattice: TorusLattice) -> Self {
        Self { lattice, values: vec![0; lattice.num_links()] }
    }

    pub fn from_values(lattice: TorusLattice, values: Vec<i64>) -> Result<Self> {
        if values.len() != lattice.num_links() {
            return Err(Error::InvalidParameter(format!(
                "expected {} link values, got {}",
                lattice.num_links(),
                values.len()
            )));
        }
        Ok(Self { lattice, values })
    }

    pub fn lattice(&self) -> TorusLattice {
        self.lattice
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<i64> {
        self.values
    }

    #[inline]
    pub fn get(&self, link: usize) -> i64 {
        self.values[link]
    }

    #[inline]
    pub fn at(&self, site: usize, axis: Axis) -> i64 {
        self.values[self.lattice.link(site, axis)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [i64] {
        &mut self.values
    }

    pub fn set(&mut self, link: usize, value: i64) {
        self.values[link] = value;
    }

    /// Adds `delta` to one link, failing on overflow.
    pub fn increment(&mut self, link: usize, delta: i64) -> Result<()> {
        let v = &mut self.values[link];
        *v = v.checked_add(delta).ok_or(Error::Overflow("link increment"))?;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Lattice divergence: outflow minus inflow at every site.
    pub fn divergence(&self) -> Result<Syndrome> {
        let lat = self.lattice;
        let mut charges = vec![0i64; lat.num_sites()];
        for (site, q) in charges.iter_mut().enumerate() {
            let [ox, oy, ix, iy] = lat.incident_links(site);
            let v = &self.values;
            *q = v[ox]
                .checked_add(v[oy])
                .and_then(|s| s.checked_sub(v[ix]))
                .and_then(|s| s.checked_sub(v[iy]))
                .ok_or(Error::Overflow("divergence"))?;
        }
        Ok(Syndrome { lattice: lat, charges })
    }

    pub fn is_divergenceless(&self) -> Result<bool> {
        Ok(self.divergence()?.is_zero())
    }

    /// `(sum_i f_ix / L, sum_i f_iy / L)` as exact rationals.
    pub fn winding(&self) -> Result<Winding> {
        let mut sx = 0i64;
        let mut sy = 0i64;
        for pair in self.values.chunks_exact(2) {
            sx = sx.checked_add(pair[0]).ok_or(Error::Overflow("winding"))?;
            sy = sy.checked_add(pair[1]).ok_or(Error::Overflow("winding"))?;
        }
        Ok(Winding { numer_x: sx, numer_y: sy, denom: self.lattice.size() as i64 })
    }

    /// Integer winding of a divergenceless field.
    pub fn integer_winding(&self) -> Result<(i64, i64)> {
        self.winding()?
            .as_integers()
            .ok_or_else(|| Error::InvalidParameter("winding of a field with nonzero divergence".into()))
    }

    pub fn checked_add(&self, other: &LinkField) -> Result<LinkField> {
        self.zip_with(other, i64::checked_add, "field add")
    }

    pub fn checked_sub(&self, other: &LinkField) -> Result<LinkField> {
        self.zip_with(other, i64::checked_sub, "field sub")
    }

    pub fn checked_neg(&self) -> Result<LinkField> {
        let values = self
            .values
            .iter()
            .map(|v| v.checked_neg().ok_or(Error::Overflow("field neg")))
            .collect::<Result<Vec<_>>>()?;
        Ok(LinkField { lattice: self.lattice, values })
    }

    fn zip_with(&self, other: &LinkField, op: fn(i64, i64) -> Option<i64>, what: &'static str) -> Result<LinkField> {
        check_same(self.lattice, other.lattice)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b).ok_or(Error::Overflow(what)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LinkField { lattice: self.lattice, values })
    }

    pub fn l1_norm(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sum_squares(&self) -> i64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(l: usize) -> TorusLattice {
        TorusLattice::new(l).unwrap()
    }

    /// Per-site sum written straight from the definition, no shared helpers.
    fn divergence_oracle(f: &LinkField) -> Vec<i64> {
        let l = f.lattice().size();
        let mut out = vec![0; l * l];
        for y in 0..l {
            for x in 0..l {
                let here = y * l + x;
                let left = y * l + (x + l - 1) % l;
                let below = ((y + l - 1) % l) * l + x;
                out[here] =
                    f.values()[2 * here] + f.values()[2 * here + 1] - f.values()[2 * left] - f.values()[2 * below + 1];
            }
        }
        out
    }

    /// Sum of x-link values cut by a deformed vertical cut: the cut starts at
    /// column `start` and may shift by one column between rows. The cut is
    /// closed by undoing the net shift along the top row, so it stays
    /// homologous to a straight vertical cycle.
    fn cut_winding_x(f: &LinkField, start: usize, shifts: &[i8]) -> i64 {
        let lat = f.lattice();
        let l = lat.size();
        let mut col = start;
        let mut net: i64 = 0;
        let mut total = 0;
        let step = |col: &mut usize, y: usize, right: bool, total: &mut i64| {
            if right {
                // Path heading +x: flux crossing from above to below counts.
                *col = (*col + 1) % l;
                *total -= f.at(lat.site(*col, y), Axis::Y);
            } else {
                *total += f.at(lat.site(*col, y), Axis::Y);
                *col = (*col + l - 1) % l;
            }
        };
        for (y, &shift) in shifts.iter().enumerate().take(l) {
            total += f.at(lat.site(col, y), Axis::X);
            match shift {
                s if s > 0 => {
                    step(&mut col, y, true, &mut total);
                    net += 1;
                }
                s if s < 0 => {
                    step(&mut col, y, false, &mut total);
                    net -= 1;
                }
                _ => {}
            }
        }
        // The shifts after row L-1 already sit on the closing row; undo the
        // whole net displacement there.
        while net != 0 {
            step(&mut col, l - 1, net < 0, &mut total);
            net += if net < 0 { 1 } else { -1 };
        }
        assert_eq!(col, start);
        total
    }

    /// Divergenceless field from random closed walks plus straight loops.
    fn random_loops(l: usize, seed: u64) -> LinkField {
        use rand::{Rng, SeedableRng};
        let lat = lat(l);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = LinkField::zeros(lat);
        for _ in 0..6 {
            let start = rng.random_range(0..lat.num_sites());
            let mut site = start;
            let mut steps = 0;
            loop {
                let d = Direction::from_index(rng.random_range(0..4));
                f.increment(lat.step_link(site, d), d.sign()).unwrap();
                site = lat.neighbor(site, d);
                steps += 1;
                if site == start || steps > 200 {
                    break;
                }
            }
            // Close an unfinished walk by walking straight home.
            while site != start {
                let (x, y) = lat.coords(site);
                let (sx, sy) = lat.coords(start);
                let d = if x != sx {
                    Direction::PlusX
                } else if y != sy {
                    Direction::PlusY
                } else {
                    unreachable!()
                };
                f.increment(lat.step_link(site, d), d.sign()).unwrap();
                site = lat.neighbor(site, d);
            }
        }
        f
    }

    #[test]
    fn link_enumeration_is_bijective() {
        let lat = lat(5);
        let mut seen = vec![false; lat.num_links()];
        for s in 0..lat.num_sites() {
            for a in Axis::BOTH {
                let l = lat.link(s, a);
                assert!(!seen[l]);
                seen[l] = true;
                assert_eq!(lat.link_endpoints(l), (s, a));
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn each_site_has_four_incident_links() {
        let lat = lat(4);
        let mut count = vec![0; lat.num_sites()];
        for l in 0..lat.num_links() {
            let (s, a) = lat.link_endpoints(l);
            let dir = if a == Axis::X { Direction::PlusX } else { Direction::PlusY };
            count[s] += 1;
            count[lat.neighbor(s, dir)] += 1;
        }
        assert!(count.iter().all(|&c| c == 4));
        for s in 0..lat.num_sites() {
            let inc = lat.incident_links(s);
            let mut sorted = inc;
            sorted.sort();
            sorted.windows(2).for_each(|w| assert_ne!(w[0], w[1]));
        }
    }

    #[test]
    fn zero_field_has_zero_syndrome() {
        let f = LinkField::zeros(lat(4));
        assert!(f.divergence().unwrap().is_zero());
    }

    #[test]
    fn single_link_creates_dipole() {
        let lat = lat(4);
        let mut f = LinkField::zeros(lat);
        f.set(lat.link(0, Axis::X), 1);
        let n = f.divergence().unwrap();
        assert_eq!(n.charge(0), 1);
        assert_eq!(n.charge(lat.site(1, 0)), -1);
        assert_eq!(n.num_defects(), 2);
    }

    #[test]
    fn divergence_matches_site_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let lat = lat(3);
        for _ in 0..50 {
            let vals = (0..lat.num_links()).map(|_| rng.random_range(-3..=3)).collect();
            let f = LinkField::from_values(lat, vals).unwrap();
            assert_eq!(f.divergence().unwrap().charges(), divergence_oracle(&f).as_slice());
        }
    }

    #[test]
    fn straight_row_winds_once() {
        let lat = lat(6);
        let mut f = LinkField::zeros(lat);
        for x in 0..6 {
            f.set(lat.link(lat.site(x, 2), Axis::X), 1);
        }
        assert!(f.is_divergenceless().unwrap());
        assert_eq!(f.integer_winding().unwrap(), (1, 0));
    }

    #[test]
    fn plaquette_has_no_winding() {
        let lat = lat(4);
        let mut f = LinkField::zeros(lat);
        let s = lat.site(1, 1);
        f.set(lat.link(s, Axis::X), 1);
        f.set(lat.link(lat.site(2, 1), Axis::Y), 1);
        f.set(lat.link(lat.site(1, 2), Axis::X), -1);
        f.set(lat.link(s, Axis::Y), -1);
        assert!(f.is_divergenceless().unwrap());
        assert_eq!(f.integer_winding().unwrap(), (0, 0));
    }

    #[test]
    fn non_divergenceless_winding_is_fractional() {
        let lat = lat(4);
        let mut f = LinkField::zeros(lat);
        f.set(0, 1);
        let w = f.winding().unwrap();
        assert!(!w.is_integral());
        assert_eq!(w.as_f64(), (0.25, 0.0));
        assert!(f.integer_winding().is_err());
    }

    #[test]
    fn deformed_cuts_agree_with_average_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let f = random_loops(4, seed);
            assert!(f.is_divergenceless().unwrap());
            let (wx, _) = f.integer_winding().unwrap();
            for _ in 0..10 {
                let start = rng.random_range(0..4);
                let shifts: Vec<i8> = (0..4).map(|_| rng.random_range(-1..=1)).collect();
                assert_eq!(cut_winding_x(&f, start, &shifts), wx, "seed {seed} shifts {shifts:?}");
            }
        }
    }

    #[test]
    fn field_arithmetic_identities() {
        let a = random_loops(4, 3);
        let b = random_loops(4, 4);
        assert!(a.checked_sub(&a).unwrap().is_zero());
        assert_eq!(a.checked_add(&b).unwrap().checked_sub(&a).unwrap(), b);
    }

    #[test]
    fn overflow_is_reported() {
        let lat = lat(2);
        let mut f = LinkField::zeros(lat);
        f.set(0, i64::MAX);
        assert!(f.increment(0, 1).is_err());
        f.set(1, i64::MAX);
        assert_eq!(f.divergence(), Err(Error::Overflow("divergence")));
        let g = f.clone();
        assert_eq!(f.checked_add(&g), Err(Error::Overflow("field add")));
    }

    #[test]
    fn mismatched_lattices_rejected() {
        let a = LinkField::zeros(lat(2));
        let b = LinkField::zeros(lat(3));
        assert!(matches!(a.checked_add(&b), Err(Error::LatticeMismatch(2, 3))));
    }

    #[test]
    fn serialization_uses_documented_order() {
        let lat = lat(2);
        let mut f = LinkField::zeros(lat);
        f.set(lat.link(1, Axis::Y), 5);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"L":2,"values":[0,0,0,5,0,0,0,0]}"#);
        let back: LinkField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<LinkField>(r#"{"L":2,"values":[1]}"#).is_err());
    }

    proptest! {
        #[test]
        fn divergence_is_linear(a in proptest::collection::vec(-50i64..50, 18),
                                b in proptest::collection::vec(-50i64..50, 18)) {
            let lat = lat(3);
            let fa = LinkField::from_values(lat, a).unwrap();
            let fb = LinkField::from_values(lat, b).unwrap();
            let sum = fa.checked_add(&fb).unwrap().divergence().unwrap();
            let diff = fa.checked_sub(&fb).unwrap().divergence().unwrap();
            let da = fa.divergence().unwrap();
            let db = fb.divergence().unwrap();
            for s in 0..9 {
                prop_assert_eq!(sum.charge(s), da.charge(s) + db.charge(s));
                prop_assert_eq!(diff.charge(s), da.charge(s) - db.charge(s));
            }
            prop_assert_eq!(da.total().unwrap(), 0);
        }

        #[test]
        fn curl_of_heights_has_zero_winding(h in proptest::collection::vec(-5i64..5, 25)) {
            // J_{i x} = h(dual above-right of i) - h(dual below-right), and similarly for y,
            // so J is the curl of an integer height on dual sites.
            let l = 5;
            let lat = lat(l);
            let dual = |x: usize, y: usize| h[(y % l) * l + (x % l)];
            let mut f = LinkField::zeros(lat);
            for y in 0..l {
                for x in 0..l {
                    let s = lat.site(x, y);
                    // dual site (x, y) sits at (x + 1/2, y + 1/2)
                    f.set(lat.link(s, Axis::X), dual(x, y) - dual(x, y + l - 1));
                    f.set(lat.link(s, Axis::Y), dual(x + l - 1, y) - dual(x, y));
                }
            }
            prop_assert!(f.is_divergenceless().unwrap());
            prop_assert_eq!(f.integer_winding().unwrap(), (0, 0));
        }

        #[test]
        fn loops_have_integer_winding(seed in 0u64..500) {
            let f = random_loops(5, seed);
            prop_assert!(f.is_divergenceless().unwrap());
            prop_assert!(f.winding().unwrap().is_integral());
        }
    }
}
