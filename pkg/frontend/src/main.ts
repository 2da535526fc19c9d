/** Dashboard wiring: spider chart, manifold scatter, output panel, and the
 *  interpolation view, all driven by the gateway API. At most one mutating
 *  request per session is in flight; stale responses are dropped by revision. */

import { ApiClient, loadFullEmbedding } from "./api.js";
import { applyMixture, applyServerState, initialViewState } from "./state.js";
import type { Hit, MetaResponse, PathStep, SessionState } from "./types.js";
import { interpolationModel, sparklinePoints } from "./views/interpolation.js";
import { panelModel, suggestionList } from "./views/panel.js";
import {
  fitTransform, hitTest, renderScatter, scatterModel, similarityToLightness,
} from "./views/scatter.js";
import { dragToValue, spiderModel } from "./views/spider.js";

const SPIDER_RADIUS = 110;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Dashboard {
  private readonly client = new ApiClient("");
  private view = initialViewState();
  private meta!: MetaResponse;
  private embedding: { ids: number[]; xy: number[][] } = { ids: [], xy: [] };
  private similarity = new Map<number, number>();
  private hits: Hit[] = [];
  private suggestions: Hit[] = [];
  private sensitivityTangent: number[] | undefined;
  private mutationInFlight = false;

  async start(): Promise<void> {
    this.meta = await this.client.meta();
    el<HTMLSpanElement>("record-count").textContent = String(this.meta.n_records);
    this.embedding = await loadFullEmbedding(this.client, "output");
    const created = await this.client.createSession();
    this.view.sessionId = created.session_id;
    applyMixture(this.view, created.mixture, created.revision);
    this.bindEvents();
    await this.refreshSearch();
    this.renderAll();
  }

  // ---- server round-trips (single-flight) ----

  private async mutate<T>(call: () => Promise<T>): Promise<T | null> {
    if (this.mutationInFlight) return null;
    this.mutationInFlight = true;
    try {
      return await call();
    } catch (err) {
      this.showError(err);
      return null;
    } finally {
      this.mutationInFlight = false;
    }
  }

  private showError(err: unknown): void {
    const box = el<HTMLDivElement>("error-box");
    const message = (err as { message?: string }).message ?? String(err);
    box.textContent = message;
    box.style.display = "block";
    setTimeout(() => { box.style.display = "none"; }, 5000);
  }

  private applyState(state: SessionState): void {
    if (applyServerState(this.view, state)) {
      void this.refreshSimilarity();
      this.renderAll();
    }
  }

  async dragAxis(dim: number, value: number): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.adjustInput(sid, dim, value));
    if (resp && applyMixture(this.view, resp.mixture, resp.revision)) {
      await this.refreshSearch();
      this.renderAll();
    }
  }

  private async refreshSearch(): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.search(sid));
    if (resp) this.hits = resp.hits;
  }

  private async refreshSimilarity(): Promise<void> {
    if (this.view.selectedId === null) {
      this.similarity.clear();
      return;
    }
    const selected = this.view.selectedId;
    this.similarity.clear();
    let page = 0;
    for (;;) {
      const body = await this.client.similarityPage(selected, page, 10000);
      if (body.ids.length === 0) break;
      body.ids.forEach((id, i) => this.similarity.set(id, body.scores[i]));
      if (this.similarity.size >= body.total) break;
      page += 1;
    }
    this.renderScatterView();
  }

  async selectRecord(id: number, viaPick: boolean): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() =>
      viaPick ? this.client.pick(sid, id) : this.client.select(sid, id));
    if (resp) this.applyState(resp.state);
  }

  async editTarget(outputIndex: number, value: number): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.setTarget(sid, outputIndex, value));
    if (resp) this.applyState(resp.state);
  }

  async requestSuggestions(): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.suggest(sid));
    if (resp) {
      this.suggestions = resp.hits;
      this.renderSuggestions();
    }
  }

  async interpolateTo(id: number): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.interpolate(sid, id));
    if (resp) {
      this.view.currentPath = resp.path;
      this.view.activeView = "interpolate";
      await this.renderInterpolation();
      this.renderScatterView();
    }
  }

  async commitStep(stepIndex: number): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    const resp = await this.mutate(() => this.client.commit(sid, stepIndex));
    if (resp) {
      this.view.currentPath = null;
      this.applyState(resp.state);
    }
  }

  async hoverOutputRow(outputIndex: number | null): Promise<void> {
    if (outputIndex === null) {
      this.sensitivityTangent = undefined;
      this.renderSpider();
      return;
    }
    try {
      const resp = await this.client.sensitivity(this.view.mixture, outputIndex);
      this.sensitivityTangent = resp.tangent;
      this.renderSpider();
    } catch (err) {
      this.showError(err);
    }
  }

  // ---- rendering ----

  private renderAll(): void {
    this.renderSpider();
    this.renderScatterView();
    this.renderPanel();
    void this.renderInterpolation();
    this.renderHits();
    el<HTMLSpanElement>("revision").textContent = String(this.view.revision);
  }

  private renderSpider(): void {
    const svg = el<HTMLElement>("spider");
    const model = spiderModel(
      this.view.mixture, this.meta.input_names, SPIDER_RADIUS, this.sensitivityTangent);
    const cx = 150, cy = 150;
    const axisLines = model.axes.map((a) => {
      const ex = cx + Math.cos(a.angle) * SPIDER_RADIUS;
      const ey = cy + Math.sin(a.angle) * SPIDER_RADIUS;
      const lx = cx + Math.cos(a.angle) * (SPIDER_RADIUS + 18);
      const ly = cy + Math.sin(a.angle) * (SPIDER_RADIUS + 18);
      const arrow = a.arrow
        ? `<line x1="${ex}" y1="${ey}" x2="${ex + Math.cos(a.angle) * a.arrow.length * a.arrow.sign}" ` +
          `y2="${ey + Math.sin(a.angle) * a.arrow.length * a.arrow.sign}" ` +
          `stroke="${a.arrow.sign > 0 ? "#2e7d32" : "#c62828"}" stroke-width="3"/>`
        : "";
      return `
        <line x1="${cx}" y1="${cy}" x2="${ex}" y2="${ey}" stroke="#ccc"
              data-dim="${a.dim}" class="axis" stroke-width="8" opacity="0.35"/>
        <text x="${lx}" y="${ly}" font-size="10" text-anchor="middle"
              data-value="${a.value}">${a.label}</text>
        ${arrow}`;
    }).join("");
    const pts = model.polygon.map(([x, y]) => `${cx + x},${cy + y}`).join(" ");
    svg.innerHTML = `${axisLines}
      <polygon points="${pts}" fill="rgba(33,150,243,0.35)" stroke="#1976d2" stroke-width="2"/>`;
    el<HTMLSpanElement>("mixture-sum").textContent = model.total.toFixed(2);
    svg.querySelectorAll<SVGLineElement>("line.axis").forEach((line) => {
      line.addEventListener("pointerdown", (ev) => this.beginAxisDrag(ev, line));
    });
  }

  private beginAxisDrag(down: PointerEvent, line: SVGLineElement): void {
    const dim = Number(line.dataset.dim);
    const svg = el<HTMLElement>("spider");
    const rect = svg.getBoundingClientRect();
    const angle = -Math.PI / 2 + (2 * Math.PI * dim) / 6;
    const move = (ev: PointerEvent) => {
      const dx = ev.clientX - rect.left - 150;
      const dy = ev.clientY - rect.top - 150;
      const along = dx * Math.cos(angle) + dy * Math.sin(angle);
      line.dataset.pending = String(dragToValue(along, SPIDER_RADIUS));
    };
    const up = () => {
      window.removeEventListener("pointermove", move);
      window.removeEventListener("pointerup", up);
      const pending = line.dataset.pending;
      if (pending !== undefined) void this.dragAxis(dim, Number(pending));
    };
    window.addEventListener("pointermove", move);
    window.addEventListener("pointerup", up);
  }

  private renderScatterView(): void {
    const canvas = el<HTMLCanvasElement>("scatter");
    const ctx2d = canvas.getContext("2d");
    if (!ctx2d) return;
    const model = scatterModel(
      this.embedding.ids, this.embedding.xy, this.similarity, this.view.currentPath);
    const transform = fitTransform(this.embedding.xy, canvas.width, canvas.height);
    renderScatter(ctx2d, model, canvas.width, canvas.height, transform);
    canvas.onclick = (ev) => {
      const rect = canvas.getBoundingClientRect();
      const id = hitTest(model, ev.clientX - rect.left, ev.clientY - rect.top,
        canvas.width, canvas.height, transform);
      if (id !== null) void this.selectRecord(id, true);
    };
    canvas.onmousemove = async (ev) => {
      const rect = canvas.getBoundingClientRect();
      const id = hitTest(model, ev.clientX - rect.left, ev.clientY - rect.top,
        canvas.width, canvas.height, transform);
      if (id !== null && id !== this.view.hoveredId) {
        this.view.hoveredId = id;
        const point = await this.client.point(id);
        el<HTMLDivElement>("hover-glyph").textContent =
          `#${id} mixture: [${point.input.join(", ")}]`;
      }
    };
  }

  private renderHits(): void {
    const list = el<HTMLUListElement>("hits");
    list.innerHTML = "";
    for (const hit of this.hits) {
      const item = document.createElement("li");
      item.textContent = `#${hit.id} d=${hit.distance}`;
      item.dataset.id = String(hit.id);
      item.onclick = () => void this.selectRecord(hit.id, false);
      list.appendChild(item);
    }
  }

  private renderSuggestions(): void {
    const list = el<HTMLUListElement>("suggestions");
    list.innerHTML = "";
    for (const item of suggestionList(this.suggestions)) {
      const li = document.createElement("li");
      li.textContent = `#${item.id} d=${item.distance}`;
      li.onmouseenter = () => { this.view.hoveredId = item.id; this.renderScatterView(); };
      li.onclick = () => void this.interpolateTo(item.id);
      list.appendChild(li);
    }
  }

  private renderPanel(): void {
    const container = el<HTMLDivElement>("output-panel");
    const record = this.view.recordId === null ? null : this.hits.find(
      (h) => h.id === this.view.recordId)?.output ?? null;
    const model = panelModel(
      record, this.meta.output_names, this.view.adjustments,
      this.meta.stats.constant_outputs);
    container.innerHTML = "";
    if (!model.enabled) {
      container.textContent = model.hint ?? "";
      return;
    }
    for (const row of model.rows) {
      const div = document.createElement("div");
      div.className = "panel-row" + (row.adjusted ? " adjusted" : "");
      const label = document.createElement("span");
      label.textContent = `${row.name}: `;
      const valueSpan = document.createElement("span");
      valueSpan.dataset.value = String(row.value);
      valueSpan.textContent = String(row.value);
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.value = row.target !== undefined ? String(row.target) : "";
      input.disabled = row.constant;
      input.onchange = () => void this.editTarget(row.index, Number(input.value));
      div.onmouseenter = () => void this.hoverOutputRow(row.index);
      div.onmouseleave = () => void this.hoverOutputRow(null);
      div.append(label, valueSpan, input);
      container.appendChild(div);
    }
  }

  private async renderInterpolation(): Promise<void> {
    const container = el<HTMLDivElement>("interpolation");
    const path = this.view.currentPath;
    container.innerHTML = "";
    if (!path) return;
    const snapped = await this.snappedOutputs(path);
    const expanded = el<HTMLInputElement>("expand-sparklines").checked;
    const model = interpolationModel(path, this.meta.output_names, snapped, expanded);

    const axis = document.createElement("div");
    axis.className = "lambda-axis";
    const left = document.createElement("span");
    left.textContent = model.leftLabel;
    axis.appendChild(left);
    for (const tick of model.ticks) {
      const btn = document.createElement("button");
      btn.textContent = tick.lambda.toFixed(2);
      btn.title = `snap #${tick.snappedId}`;
      btn.onclick = () => void this.commitStep(tick.index);
      axis.appendChild(btn);
    }
    const right = document.createElement("span");
    right.textContent = model.rightLabel;
    axis.appendChild(right);
    container.appendChild(axis);

    const grid = document.createElement("div");
    grid.className = "sparkline-grid";
    for (const line of model.sparklines) {
      const cell = document.createElement("div");
      cell.className = "sparkline";
      const title = document.createElement("div");
      title.textContent = line.name;
      const svgPoints = sparklinePoints(line)
        .map(([x, y]) => `${x * 80},${30 - y * 30}`).join(" ");
      const snappedPoly = line.snapped
        ? `<polyline fill="none" stroke="#999" stroke-dasharray="2 2" points="${
            line.snapped.map((v, i) => {
              const lo = Math.min(...line.values, ...line.snapped!);
              const hi = Math.max(...line.values, ...line.snapped!);
              const span = hi - lo || 1;
              return `${(i / (line.snapped!.length - 1)) * 80},${30 - ((v - lo) / span) * 30}`;
            }).join(" ")}"/>`
        : "";
      const svg = `<svg width="84" height="32" viewBox="-2 -1 84 32">
        ${snappedPoly}
        <polyline fill="none" stroke="#1976d2" points="${svgPoints}"/>
      </svg>`;
      cell.innerHTML = `${svg}`;
      cell.prepend(title);
      grid.appendChild(cell);
    }
    container.appendChild(grid);
  }

  private async snappedOutputs(path: PathStep[]): Promise<Map<number, number[]>> {
    const result = new Map<number, number[]>();
    const unique = [...new Set(path.map((s) => s.snapped_id))];
    await Promise.all(unique.map(async (id) => {
      const point = await this.client.point(id);
      result.set(id, point.output);
    }));
    return result;
  }

  private bindEvents(): void {
    el<HTMLButtonElement>("suggest-btn").onclick = () => void this.requestSuggestions();
    el<HTMLInputElement>("expand-sparklines").onchange = () => void this.renderInterpolation();
  }
}

if (typeof document !== "undefined" && document.getElementById("spider")) {
  void new Dashboard().start();
}

export { Dashboard, similarityToLightness };
