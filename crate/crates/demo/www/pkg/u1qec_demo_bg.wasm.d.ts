/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_decoded_free: (a: number, b: number) => void;
export const decoded_charges: (a: number) => [number, number];
export const decoded_cost: (a: number) => number;
export const decoded_error: (a: number) => [number, number];
export const decoded_recovery: (a: number) => [number, number];
export const decoded_size: (a: number) => number;
export const decoded_success: (a: number) => number;
export const decoded_wx: (a: number) => number;
export const decoded_wy: (a: number) => number;
export const noiseCurves: (a: number, b: number, c: number) => [number, number, number, number];
export const sampleAndDecode: (a: number, b: number, c: number, d: number) => [number, number, number];
export const sectorHistogram: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
