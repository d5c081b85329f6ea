/* tslint:disable */
/* eslint-disable */

/**
 * Fitted scenario kept alive between calls so the condition explorer does
 * not refit.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Posterior band, truth and naive curves as JSON.
     */
    band(): string;
    /**
     * Probability of `recall > r and precision > p` per threshold.
     */
    condition(recall: number, precision: number, confidence: number): string;
    constructor(scenario_json: string);
}

export function densityCurves(scenario_json: string, points: number, bins: number): string;

/**
 * Family names accepted in scenarios.
 */
export function families(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly densityCurves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly families: () => [number, number];
    readonly session_band: (a: number) => [number, number, number, number];
    readonly session_condition: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly session_new: (a: number, b: number) => [number, number, number];
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
