/* tslint:disable */
/* eslint-disable */

/**
 * Convergence ladder over comma-separated sizes; the report rows carry the
 * L^p error, global/inner sup errors, endpoint errors, the interpolant
 * bound (when `m >= 2l + 1`), and the optimality gap.
 */
export function converge(_function: string, m: number, l: number, p: number, sizes: string, partition: string, seed: bigint): string;

/**
 * The x^n family on [0, 1]: best monotone constant-spline approximations
 * have L^p norm ((np + 1)^(-1/p)) -> 0 while the sup norm stays 1.
 */
export function counterexample(p: number, n_max: number): string;

/**
 * Best L^p fit of a builtin target on one partition, with a plot-ready
 * sampling of target and fit.
 */
export function fit(_function: string, m: number, l: number, p: number, size: number, partition: string, seed: bigint): string;

/**
 * Builtin target ids, in display order.
 */
export function list_functions(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly converge: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: bigint) => [number, number, number, number];
    readonly counterexample: (a: number, b: number) => [number, number, number, number];
    readonly fit: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number, number];
    readonly list_functions: () => [number, number];
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
