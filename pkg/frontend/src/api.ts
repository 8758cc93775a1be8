/**
 * Thin typed client for the catalog service.
 *
 * The UI never filters, re-ranks, or counts locally; everything rendered
 * comes verbatim from these responses. At most one search request is in
 * flight: a newer call supersedes the pending one (last-write-wins).
 */

import type { ApiError, MetadataRecord, SearchResult } from "./types.js";
import type { UiSearchState } from "./state.js";
import { toApiParams } from "./state.js";

declare global {
  interface Window {
    MERCURY_API_BASE?: string;
  }
}

/** Same-origin by default; deploys may set window.MERCURY_API_BASE. */
export function apiBase(): string {
  return (typeof window !== "undefined" && window.MERCURY_API_BASE) || "";
}

export class ApiFailure extends Error {
  constructor(public readonly error: ApiError) {
    super(error.message);
  }
}

export class Superseded extends Error {
  constructor() {
    super("request superseded by a newer one");
  }
}

async function parseResponse<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    throw new ApiFailure(body as ApiError);
  }
  return body as T;
}

let searchSequence = 0;

/** Run a search; if another search starts before this one settles, reject
 * with Superseded so stale results never render. */
export async function searchRecords(
  state: UiSearchState,
  fetcher: typeof fetch = fetch,
): Promise<SearchResult> {
  const ticket = ++searchSequence;
  const query = toApiParams(state).toString();
  const url = `${apiBase()}/api/search${query ? "?" + query : ""}`;
  const response = await fetcher(url);
  const result = await parseResponse<SearchResult>(response);
  if (ticket !== searchSequence) {
    throw new Superseded();
  }
  return result;
}

export async function fetchRecord(
  recordId: string,
  fetcher: typeof fetch = fetch,
): Promise<MetadataRecord> {
  const url = `${apiBase()}/api/records/${encodeURIComponent(recordId)}`;
  return parseResponse<MetadataRecord>(await fetcher(url));
}
