/* tslint:disable */
/* eslint-disable */

/**
 * Source and target clouds of the 2-D scene.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    constructor(n_source: number, n_target: number, shift: number, seed: number);
    /**
     * `[mean_min_dist, max_min_dist, i0, i1, ...]` for the chosen strategy.
     */
    select(strategy: string, budget: number, seed: number): Float64Array;
    /**
     * Source coordinates, interleaved x0 y0 x1 y1 ...
     */
    source_xy(): Float64Array;
    target_xy(): Float64Array;
}

/**
 * `[delta, gamma, reject_prob, clipped]` of the uniform-cube scenario.
 */
export function bb_bound(cluster_size: number, dim: number, batch: number, eps: number): Float64Array;

/**
 * Envelope curves: the first `steps` values are the upper curve, the rest the lower.
 */
export function envelopes(xs: Float64Array, ys: Float64Array, k: number, lo: number, hi: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly bb_bound: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly envelopes: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly scene_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly scene_select: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly scene_source_xy: (a: number) => [number, number];
    readonly scene_target_xy: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
