/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_clustered_free: (a: number, b: number) => void;
export const __wbg_profile_free: (a: number, b: number) => void;
export const cluster: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
export const clustered_edges: (a: number) => [number, number];
export const clustered_failure: (a: number) => [number, number];
export const clustered_labels: (a: number) => [number, number];
export const clustered_misclassified: (a: number) => number;
export const clustered_peak_words: (a: number) => number;
export const clustered_recovered: (a: number) => number;
export const clustered_rounds: (a: number) => number;
export const clustered_truth: (a: number) => [number, number];
export const clustered_vertex_count: (a: number) => number;
export const profile: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const profile_distances: (a: number) => [number, number];
export const profile_same_cluster: (a: number) => [number, number];
export const profile_threshold: (a: number) => number;
export const rounds_vs_s: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint, h: number, i: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
