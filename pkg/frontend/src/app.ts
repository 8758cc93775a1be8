/**
 * Application wiring: controls -> state -> URL -> API -> rendering.
 *
 * The URL query string is the single source of truth; every control change
 * produces a new state, pushes it to the URL, and issues a fresh search.
 * Stale in-flight responses are discarded (see api.Superseded).
 */

import { ApiFailure, Superseded, fetchRecord, searchRecords } from "./api.js";
import {
  DEFAULT_STATE,
  UiSearchState,
  decodeState,
  encodeState,
} from "./state.js";
import {
  renderError,
  renderFacets,
  renderNotFound,
  renderRecordDetail,
  renderResults,
} from "./render.js";

export class App {
  state: UiSearchState;
  private readonly fetcher: typeof fetch;
  private readonly root: HTMLElement;
  private form!: HTMLFormElement;
  private facetPane!: HTMLElement;
  private resultPane!: HTMLElement;

  constructor(root: HTMLElement, fetcher: typeof fetch = fetch) {
    this.root = root;
    this.fetcher = fetcher;
    this.state = decodeState(window.location.search);
    this.buildChrome();
    window.addEventListener("popstate", () => {
      this.state = decodeState(window.location.search);
      this.syncControls();
      void this.refresh();
    });
  }

  /** Apply a state change: push it to the URL and re-query. */
  navigate(next: UiSearchState): Promise<void> {
    this.state = next;
    const query = encodeState(next);
    window.history.pushState(null, "", query ? `?${query}` : window.location.pathname);
    this.syncControls();
    return this.refresh();
  }

  async refresh(): Promise<void> {
    if (this.state.record) {
      await this.showRecord(this.state.record);
      return;
    }
    try {
      const result = await searchRecords(this.state, this.fetcher);
      this.facetPane.replaceChildren(renderFacets(result, this.state, {
        onProvider: (provider) => void this.navigate({
          ...this.state,
          provider: this.state.provider === provider ? "" : provider,
          page: 1,
        }),
        onKeyword: (keyword) => void this.navigate({
          ...this.state,
          keyword: this.state.keyword === keyword ? "" : keyword,
          page: 1,
        }),
      }));
      this.resultPane.replaceChildren(renderResults(result, this.state, {
        onOpenRecord: (recordId) => void this.navigate({ ...this.state, record: recordId }),
        onPage: (page) => void this.navigate({ ...this.state, page }),
      }));
    } catch (failure) {
      if (failure instanceof Superseded) return;
      if (failure instanceof ApiFailure) {
        this.resultPane.replaceChildren(
          renderError(`${failure.error.code}: ${failure.error.message}`));
        return;
      }
      this.resultPane.replaceChildren(renderError(String(failure)));
    }
  }

  private async showRecord(recordId: string): Promise<void> {
    const back = () => void this.navigate({ ...this.state, record: "" });
    try {
      const record = await fetchRecord(recordId, this.fetcher);
      this.resultPane.replaceChildren(renderRecordDetail(record, back));
    } catch (failure) {
      if (failure instanceof ApiFailure && failure.error.status === 404) {
        this.resultPane.replaceChildren(renderNotFound(back));
        return;
      }
      this.resultPane.replaceChildren(renderError(String(failure)));
    }
  }

  private buildChrome(): void {
    this.root.replaceChildren();
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "Metadata Catalog Search";
    header.appendChild(title);
    this.root.appendChild(header);

    this.form = document.createElement("form");
    this.form.className = "search-form";
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.applyControls();
    });

    this.form.appendChild(this.textInput("q", "Search terms", "soil carbon ..."));
    const bboxGroup = document.createElement("fieldset");
    bboxGroup.className = "bbox-group";
    const legend = document.createElement("legend");
    legend.textContent = "Bounding box (degrees)";
    bboxGroup.appendChild(legend);
    for (const side of ["west", "south", "east", "north"] as const) {
      bboxGroup.appendChild(this.numberInput(`bbox-${side}`, side));
    }
    this.form.appendChild(bboxGroup);
    this.form.appendChild(this.textInput("start", "Start date", "YYYY-MM-DD"));
    this.form.appendChild(this.textInput("end", "End date", "YYYY-MM-DD"));

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Search";
    this.form.appendChild(submit);
    this.root.appendChild(this.form);

    const main = document.createElement("div");
    main.className = "content";
    this.facetPane = document.createElement("div");
    this.facetPane.className = "facet-pane";
    this.resultPane = document.createElement("div");
    this.resultPane.className = "result-pane";
    main.appendChild(this.facetPane);
    main.appendChild(this.resultPane);
    this.root.appendChild(main);
    this.syncControls();
  }

  /** Read the form controls into a fresh state (resets to page 1). */
  applyControls(): Promise<void> {
    const next: UiSearchState = { ...DEFAULT_STATE };
    next.q = this.inputValue("q");
    const sides = ["west", "south", "east", "north"].map(
      (side) => this.inputValue(`bbox-${side}`));
    if (sides.every((v) => v.trim() !== "")) {
      const numbers = sides.map(Number);
      if (numbers.every((n) => Number.isFinite(n))) {
        next.bbox = numbers as [number, number, number, number];
      }
    }
    next.start = this.inputValue("start");
    next.end = this.inputValue("end");
    next.provider = this.state.provider;
    next.keyword = this.state.keyword;
    next.page = 1;
    return this.navigate(next);
  }

  private syncControls(): void {
    this.setInput("q", this.state.q);
    const sides = ["west", "south", "east", "north"] as const;
    sides.forEach((side, i) => {
      this.setInput(`bbox-${side}`, this.state.bbox === null ? "" : String(this.state.bbox[i]));
    });
    this.setInput("start", this.state.start);
    this.setInput("end", this.state.end);
  }

  private textInput(name: string, label: string, placeholder: string): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = `control control-${name}`;
    const caption = document.createElement("span");
    caption.textContent = label;
    wrap.appendChild(caption);
    const input = document.createElement("input");
    input.type = "text";
    input.name = name;
    input.placeholder = placeholder;
    input.addEventListener("change", () => void this.applyControls());
    wrap.appendChild(input);
    return wrap;
  }

  private numberInput(name: string, label: string): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = `control control-${name}`;
    const caption = document.createElement("span");
    caption.textContent = label;
    wrap.appendChild(caption);
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.name = name;
    input.addEventListener("change", () => void this.applyControls());
    wrap.appendChild(input);
    return wrap;
  }

  private inputValue(name: string): string {
    const input = this.form.querySelector<HTMLInputElement>(`input[name="${name}"]`);
    return input ? input.value : "";
  }

  private setInput(name: string, value: string): void {
    const input = this.form.querySelector<HTMLInputElement>(`input[name="${name}"]`);
    if (input) input.value = value;
  }
}

export function mount(root: HTMLElement, fetcher: typeof fetch = fetch): App {
  return new App(root, fetcher);
}
