/**
 * UI state <-> URL query string, losslessly.
 *
 * The whole view is driven by this state: search controls, selected facets,
 * pagination, and (when `record` is set) the record-detail view. Encoding is
 * canonical - fixed parameter order, defaults omitted - so
 * encode(decode(url)) === url for every state the app produces.
 */

export interface UiSearchState {
  q: string;
  bbox: [number, number, number, number] | null;
  start: string;
  end: string;
  provider: string;
  keyword: string;
  page: number;
  record: string; // non-empty: record-detail view for this id
}

export const DEFAULT_STATE: UiSearchState = {
  q: "",
  bbox: null,
  start: "",
  end: "",
  provider: "",
  keyword: "",
  page: 1,
  record: "",
};

const PARAM_ORDER = ["q", "bbox", "start", "end", "provider", "keyword", "page", "record"] as const;

export function encodeState(state: UiSearchState): string {
  const params = new URLSearchParams();
  for (const name of PARAM_ORDER) {
    if (name === "bbox") {
      if (state.bbox !== null) params.set("bbox", state.bbox.join(","));
    } else if (name === "page") {
      if (state.page !== 1) params.set("page", String(state.page));
    } else if (state[name] !== "") {
      params.set(name, state[name]);
    }
  }
  return params.toString();
}

export function decodeState(query: string): UiSearchState {
  const params = new URLSearchParams(query);
  const state: UiSearchState = { ...DEFAULT_STATE };
  state.q = params.get("q") ?? "";
  const bboxText = params.get("bbox");
  if (bboxText !== null) {
    const pieces = bboxText.split(",").map(Number);
    if (pieces.length === 4 && pieces.every((n) => Number.isFinite(n))) {
      state.bbox = pieces as [number, number, number, number];
    }
  }
  state.start = params.get("start") ?? "";
  state.end = params.get("end") ?? "";
  state.provider = params.get("provider") ?? "";
  state.keyword = params.get("keyword") ?? "";
  const page = Number(params.get("page") ?? "1");
  state.page = Number.isInteger(page) && page >= 1 ? page : 1;
  state.record = params.get("record") ?? "";
  return state;
}

/** Query parameters for /api/search (the record param is UI-only). */
export function toApiParams(state: UiSearchState): URLSearchParams {
  const params = new URLSearchParams();
  if (state.q) params.set("q", state.q);
  if (state.bbox !== null) params.set("bbox", state.bbox.join(","));
  if (state.start) params.set("start", state.start);
  if (state.end) params.set("end", state.end);
  if (state.provider) params.set("provider", state.provider);
  if (state.keyword) params.set("keyword", state.keyword);
  if (state.page !== 1) params.set("page", String(state.page));
  return params;
}

/** Human-readable list of the active filters, for the empty-result notice. */
export function describeFilters(state: UiSearchState): string[] {
  const parts: string[] = [];
  if (state.q) parts.push(`text "${state.q}"`);
  if (state.bbox !== null) parts.push(`bbox ${state.bbox.join(",")}`);
  if (state.start) parts.push(`from ${state.start}`);
  if (state.end) parts.push(`until ${state.end}`);
  if (state.provider) parts.push(`provider ${state.provider}`);
  if (state.keyword) parts.push(`keyword ${state.keyword}`);
  return parts;
}
