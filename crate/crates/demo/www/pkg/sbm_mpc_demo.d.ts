/* tslint:disable */
/* eslint-disable */

/**
 * One clustering run with the graph it ran on.
 */
export class Clustered {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Edge endpoints, flattened as u0, v0, u1, v1, ...
     */
    edges(): Uint32Array;
    /**
     * Stage that failed, or empty.
     */
    failure(): string;
    /**
     * Found labels; empty when the run failed.
     */
    labels(): Uint32Array;
    /**
     * -1 when the run failed before labelling.
     */
    misclassified(): number;
    peak_words(): number;
    recovered(): boolean;
    /**
     * -1 for the single-machine algorithms.
     */
    rounds(): number;
    truth(): Uint32Array;
    vertex_count(): number;
}

/**
 * Distances from vertex 0 under the power iteration, and the gap threshold.
 */
export class Profile {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * ‖B_0^r − B_u^r‖ for every u other than 0.
     */
    distances(): Float64Array;
    /**
     * 1 where u shares vertex 0's planted cluster.
     */
    same_cluster(): Uint8Array;
    /**
     * NaN when all distances are equal.
     */
    threshold(): number;
}

/**
 * Generates an instance and clusters it. `algorithm` is one of commnbr,
 * power, mpc-commnbr, mpc-power, mpc-power-par.
 */
export function cluster(algorithm: string, n: number, k: number, p: number, q: number, r: number, seed: bigint): Clustered;

export function profile(n: number, k: number, p: number, q: number, r: number, seed: bigint): Profile;

/**
 * Ledger round counts of one instance for each machine size in `s`; -1
 * where the run could not start (s too small for the model).
 */
export function rounds_vs_s(algorithm: string, n: number, k: number, p: number, q: number, seed: bigint, s: Uint32Array): Int32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_clustered_free: (a: number, b: number) => void;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly cluster: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly clustered_edges: (a: number) => [number, number];
    readonly clustered_failure: (a: number) => [number, number];
    readonly clustered_labels: (a: number) => [number, number];
    readonly clustered_misclassified: (a: number) => number;
    readonly clustered_peak_words: (a: number) => number;
    readonly clustered_recovered: (a: number) => number;
    readonly clustered_rounds: (a: number) => number;
    readonly clustered_truth: (a: number) => [number, number];
    readonly clustered_vertex_count: (a: number) => number;
    readonly profile: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly profile_distances: (a: number) => [number, number];
    readonly profile_same_cluster: (a: number) => [number, number];
    readonly profile_threshold: (a: number) => number;
    readonly rounds_vs_s: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint, h: number, i: number) => [number, number, number, number];
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
