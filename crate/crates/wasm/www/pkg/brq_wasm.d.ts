/* tslint:disable */
/* eslint-disable */

/**
 * Analytic rates against mean SNR in dB at `R = log2(1 + k mean_snr)`.
 */
export function rateCurves(db_start: number, db_stop: number, db_step: number, rate_factor: number, feedback_bits: number): string;

/**
 * One seeded session with per-slot records.
 */
export function simulateTrace(mean_snr_db: number, rate_factor: number, slots: number, seed: number, feedback_bits: number, block_len: number): string;

/**
 * Absolute rates at a fixed mean SNR against the threshold-to-mean ratio.
 */
export function thresholdSweep(mean_snr_db: number, ratio_stop: number, ratio_step: number, feedback_bits: Float64Array): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly rateCurves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulateTrace: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly thresholdSweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
