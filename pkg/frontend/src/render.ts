/**
 * DOM builders. Every number and row shown here is taken verbatim from an
 * API response object; nothing is recounted or re-sorted client-side.
 */

import type { MetadataRecord, SearchResult, SpatialExtent, TemporalExtent } from "./types.js";
import type { UiSearchState } from "./state.js";
import { describeFilters } from "./state.js";

export const PAGE_SIZE = 10; // the API's default page size

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function spatialSummary(extent: SpatialExtent): string {
  const wrap = extent.west > extent.east ? " (crosses antimeridian)" : "";
  return `lon ${extent.west}..${extent.east}, lat ${extent.south}..${extent.north}${wrap}`;
}

function temporalSummary(extent: TemporalExtent): string {
  return `${extent.start.slice(0, 10)} to ${extent.end.slice(0, 10)}`;
}

export interface ResultHandlers {
  onOpenRecord: (recordId: string) => void;
  onPage: (page: number) => void;
}

export function renderResults(
  result: SearchResult,
  state: UiSearchState,
  handlers: ResultHandlers,
): HTMLElement {
  const container = el("div", "results");
  const summary = el("p", "results-summary");
  summary.textContent = `${result.total} matching record${result.total === 1 ? "" : "s"}`;
  container.appendChild(summary);

  if (result.total === 0) {
    const empty = el("div", "no-matches");
    empty.appendChild(el("p", "", "No matches."));
    const filters = describeFilters(state);
    if (filters.length > 0) {
      empty.appendChild(el("p", "", "Active filters:"));
      const list = el("ul");
      for (const part of filters) {
        list.appendChild(el("li", "", part));
      }
      empty.appendChild(list);
    }
    container.appendChild(empty);
    return container;
  }

  const list = el("ol", "hit-list");
  list.start = (state.page - 1) * PAGE_SIZE + 1;
  for (const hit of result.hits) {
    const item = el("li", "hit");
    const link = el("a", "hit-title", hit.title || hit.record_id);
    link.href = "#";
    link.dataset.recordId = hit.record_id;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      handlers.onOpenRecord(hit.record_id);
    });
    item.appendChild(link);
    const meta = el("div", "hit-meta");
    meta.appendChild(el("span", "hit-provider", hit.provider_key));
    meta.appendChild(el("span", "hit-score", `score ${hit.score.toFixed(4)}`));
    if (hit.spatial) {
      meta.appendChild(el("span", "hit-spatial", spatialSummary(hit.spatial)));
    }
    if (hit.temporal) {
      meta.appendChild(el("span", "hit-temporal", temporalSummary(hit.temporal)));
    }
    item.appendChild(meta);
    list.appendChild(item);
  }
  container.appendChild(list);
  container.appendChild(renderPagination(result, state, handlers.onPage));
  return container;
}

function renderPagination(
  result: SearchResult,
  state: UiSearchState,
  onPage: (page: number) => void,
): HTMLElement {
  const pages = Math.max(1, Math.ceil(result.total / PAGE_SIZE));
  const nav = el("nav", "pagination");
  const prev = el("button", "page-prev", "Previous");
  prev.disabled = state.page <= 1;
  prev.addEventListener("click", () => onPage(state.page - 1));
  const next = el("button", "page-next", "Next");
  next.disabled = state.page >= pages;
  next.addEventListener("click", () => onPage(state.page + 1));
  nav.appendChild(prev);
  nav.appendChild(el("span", "page-label", `page ${state.page} of ${pages}`));
  nav.appendChild(next);
  return nav;
}

export interface FacetHandlers {
  onProvider: (provider: string) => void;
  onKeyword: (keyword: string) => void;
}

export function renderFacets(
  result: SearchResult,
  state: UiSearchState,
  handlers: FacetHandlers,
): HTMLElement {
  const aside = el("aside", "facets");

  const providers = el("section", "facet-providers");
  providers.appendChild(el("h3", "", "Providers"));
  const providerList = el("ul");
  for (const [provider, count] of Object.entries(result.facets.providers)) {
    providerList.appendChild(facetItem(
      provider, count, state.provider === provider,
      () => handlers.onProvider(provider)));
  }
  providers.appendChild(providerList);
  aside.appendChild(providers);

  const keywords = el("section", "facet-keywords");
  keywords.appendChild(el("h3", "", "Keywords"));
  const keywordList = el("ul");
  for (const facet of result.facets.keywords) {
    keywordList.appendChild(facetItem(
      facet.keyword, facet.count, state.keyword === facet.keyword,
      () => handlers.onKeyword(facet.keyword)));
  }
  keywords.appendChild(keywordList);
  aside.appendChild(keywords);
  return aside;
}

function facetItem(
  label: string,
  count: number,
  selected: boolean,
  onToggle: () => void,
): HTMLElement {
  const item = el("li", selected ? "facet selected" : "facet");
  const button = el("button", "facet-toggle");
  button.dataset.value = label;
  button.appendChild(el("span", "facet-label", label));
  button.appendChild(el("span", "facet-count", String(count)));
  button.addEventListener("click", onToggle);
  item.appendChild(button);
  return item;
}

export function renderRecordDetail(
  record: MetadataRecord,
  onBack: () => void,
): HTMLElement {
  const main = el("article", "record-detail");
  main.appendChild(backLink(onBack));
  main.appendChild(el("h2", "record-title", record.title));
  main.appendChild(el("p", "record-provenance",
    `${record.provider_key} / ${record.local_identifier} (updated ${record.datestamp})`));

  if (record.abstract) {
    const abstract = el("section", "record-abstract");
    abstract.appendChild(el("h3", "", "Abstract"));
    for (const paragraph of record.abstract.split("\n\n")) {
      abstract.appendChild(el("p", "", paragraph));
    }
    main.appendChild(abstract);
  }

  if (record.keywords.length > 0) {
    const chips = el("ul", "keyword-chips");
    for (const keyword of record.keywords) {
      chips.appendChild(el("li", "chip", keyword));
    }
    main.appendChild(chips);
  }

  if (record.attributes.length > 0) {
    const section = el("section", "record-attributes");
    section.appendChild(el("h3", "", "Measured attributes"));
    const table = el("table", "attributes-table");
    const head = el("tr");
    for (const column of ["Name", "Unit", "Precision", "Accuracy"]) {
      head.appendChild(el("th", "", column));
    }
    table.appendChild(head);
    for (const attr of record.attributes) {
      const row = el("tr", "attribute-row");
      row.appendChild(el("td", "", attr.name));
      row.appendChild(el("td", "", attr.unit));
      row.appendChild(el("td", "", attr.precision ?? ""));
      row.appendChild(el("td", "", attr.accuracy ?? ""));
      table.appendChild(row);
    }
    section.appendChild(table);
    main.appendChild(section);
  }

  if (record.lineage) {
    const lineage = el("section", "record-lineage");
    lineage.appendChild(el("h3", "", "Lineage"));
    lineage.appendChild(el("p", "", record.lineage));
    main.appendChild(lineage);
  }

  // extent sections are omitted entirely when absent, never rendered blank
  if (record.spatial) {
    const spatial = el("section", "record-spatial");
    spatial.appendChild(el("h3", "", "Spatial extent"));
    spatial.appendChild(el("p", "", spatialSummary(record.spatial)));
    main.appendChild(spatial);
  }
  if (record.temporal) {
    const temporal = el("section", "record-temporal");
    temporal.appendChild(el("h3", "", "Temporal extent"));
    temporal.appendChild(el("p", "", temporalSummary(record.temporal)));
    main.appendChild(temporal);
  }

  if (record.source_url) {
    const obtain = el("a", "obtain-data", "Obtain data");
    obtain.href = record.source_url;
    obtain.target = "_blank";
    obtain.rel = "noopener";
    main.appendChild(obtain);
  }
  return main;
}

export function renderNotFound(onBack: () => void): HTMLElement {
  const main = el("article", "not-found");
  main.appendChild(el("h2", "", "Record not found"));
  main.appendChild(el("p", "", "It may have been deleted at its provider."));
  main.appendChild(backLink(onBack));
  return main;
}

export function renderError(message: string): HTMLElement {
  return el("div", "api-error", message);
}

function backLink(onBack: () => void): HTMLElement {
  const link = el("a", "back-to-search", "Back to search");
  link.setAttribute("href", "#");
  link.addEventListener("click", (event) => {
    event.preventDefault();
    onBack();
  });
  return link;
}
