/* tslint:disable */
/* eslint-disable */

export class Decoded {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly charges: Int32Array;
    readonly cost: number;
    /**
     * Link values, link `2i` along x and `2i + 1` along y from site `i = y L + x`.
     */
    readonly error: Int32Array;
    readonly recovery: Int32Array;
    readonly size: number;
    readonly success: boolean;
    readonly wx: number;
    readonly wy: number;
}

export function noiseCurves(alpha_min: number, alpha_max: number, n: number): Float64Array;

export function sampleAndDecode(size: number, alpha: number, seed: number, quadratic: boolean): Decoded;

export function sectorHistogram(size: number, alpha: number, loops: number, seed: number): Int32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_decoded_free: (a: number, b: number) => void;
    readonly decoded_charges: (a: number) => [number, number];
    readonly decoded_cost: (a: number) => number;
    readonly decoded_error: (a: number) => [number, number];
    readonly decoded_recovery: (a: number) => [number, number];
    readonly decoded_size: (a: number) => number;
    readonly decoded_success: (a: number) => number;
    readonly decoded_wx: (a: number) => number;
    readonly decoded_wy: (a: number) => number;
    readonly noiseCurves: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sampleAndDecode: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly sectorHistogram: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
