/* tslint:disable */
/* eslint-disable */

/**
 * `[p̂, Wilson half-width, exp(−c²/σ²), σ²]` for `P{|estimate − a| > c}` at size `n`.
 */
export function deviation_probability(mode: string, order: number, beta: number, lambda: number, n: number, c: number, trials: number, seed: number): Float64Array;

/**
 * `[ξ…, |f̂_t(ξ)|…, x…, |f_t(x)|…]`, each block `points` long.
 */
export function packet_shape(t: number, lambda: number, points: number): Float64Array;

/**
 * Exact noise variance of the plain or averaged estimator at each size in `grid`.
 */
export function variance_curve(mode: string, order: number, beta: number, lambda: number, grid: Float64Array): Float64Array;

/**
 * Predicted log-log slope of [`variance_curve`].
 */
export function variance_slope(mode: string, order: number, beta: number, lambda: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly deviation_probability: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly packet_shape: (a: number, b: number, c: number) => [number, number, number, number];
    readonly variance_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly variance_slope: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
