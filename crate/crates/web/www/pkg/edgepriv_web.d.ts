/* tslint:disable */
/* eslint-disable */

/**
 * A deployment over a square area.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * BS positions as `[x0, y0, ...]`.
     */
    baseStations(): Float64Array;
    /**
     * MH of each BS slot under truthful reporting.
     */
    idealHosts(): Uint32Array;
    mecHosts(): Float64Array;
    constructor(side_m: number, base_stations: number, mec_hosts: number, seed: bigint);
    select(x: number, y: number, epsilon: number, mechanism: string, draws: number, seed: bigint): Float64Array;
}

export function cloudStats(points: Float64Array, x: number, y: number): Float64Array;

export function obfuscationCloud(x: number, y: number, epsilon: number, mechanism: string, n: number, seed: bigint): Float64Array;

/**
 * Demand-capped proportional-fair shares of one BS; `caps` may be empty.
 */
export function pfAllocate(demands: Float64Array, caps: Float64Array, capacity: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly cloudStats: (a: number, b: number, c: number, d: number) => [number, number];
    readonly obfuscationCloud: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly pfAllocate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly scene_baseStations: (a: number) => [number, number];
    readonly scene_idealHosts: (a: number) => [number, number];
    readonly scene_mecHosts: (a: number) => [number, number];
    readonly scene_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly scene_select: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
