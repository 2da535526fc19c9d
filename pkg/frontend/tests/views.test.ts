import { describe, expect, it } from "vitest";

import { fixture } from "./helpers.js";
import { spiderModel } from "../src/views/spider.js";
import {
  LOD_BUDGET, renderScatter, scatterModel, similarityToLightness,
  type Canvas2D,
} from "../src/views/scatter.js";
import { panelModel, suggestionList } from "../src/views/panel.js";
import { interpolationModel, sparklinePoints, DEFAULT_SPARKLINES } from "../src/views/interpolation.js";
import type {
  EmbeddingPage, HitsResponse, InterpolateResponse, MetaResponse,
  MixtureResponse, PointResponse, SensitivityResponse, SessionCreated,
  SimilarityPage, StateResponse,
} from "../src/types.js";

const meta = fixture<MetaResponse>("meta");

describe("spider chart", () => {
  it("renders the session mixture byte-equal to the response", () => {
    const session = fixture<SessionCreated>("session");
    const model = spiderModel(session.mixture, meta.input_names);
    expect(model.axes.map((a) => a.value)).toStrictEqual(session.mixture);
    expect(Math.abs(model.total - 1)).toBeLessThanOrEqual(1e-9);
    expect(model.total.toFixed(2)).toBe("1.00");
  });

  it("drag-rescale displays the canonical (0.5, 0.1 x5) mixture", () => {
    const drag = fixture<MixtureResponse>("drag");
    const model = spiderModel(drag.mixture, meta.input_names);
    expect(model.axes.map((a) => a.value)).toStrictEqual(drag.mixture);
    expect(model.axes[0].value).toBe(0.5);
    for (const axis of model.axes.slice(1)) {
      expect(Math.abs(axis.value - 0.1)).toBeLessThanOrEqual(1e-12);
    }
    expect(model.total.toFixed(2)).toBe("1.00");
  });

  it("shows a sensitivity overlay only when a tangent is supplied", () => {
    const drag = fixture<MixtureResponse>("drag");
    const sens = fixture<SensitivityResponse>("sensitivity");
    const plain = spiderModel(drag.mixture, meta.input_names);
    expect(plain.axes.every((a) => a.arrow === undefined)).toBe(true);
    const overlaid = spiderModel(drag.mixture, meta.input_names, 100, sens.tangent);
    expect(overlaid.axes.every((a) => a.arrow !== undefined)).toBe(true);
    const signs = overlaid.axes.map((a) => a.arrow!.sign);
    expect(signs).toStrictEqual(sens.tangent.map((t) => (t >= 0 ? 1 : -1)));
  });
});

describe("embedding scatter", () => {
  const page = fixture<EmbeddingPage>("embedding_full");
  const interp = fixture<InterpolateResponse>("interpolate");

  it("path polyline vertex count equals the step count", () => {
    const model = scatterModel(page.ids, page.xy, undefined, interp.path);
    expect(model.polyline.length).toBe(interp.path.length);
    expect(model.polyline.length).toBe(21);
    model.polyline.forEach((v, i) => {
      expect([v.x, v.y]).toStrictEqual(interp.path[i].embed_xy);
      expect(v.lambda).toBe(interp.path[i].lambda);
    });
  });

  it("renders the polyline through a canvas context", () => {
    const model = scatterModel(page.ids, page.xy, undefined, interp.path);
    const calls: string[] = [];
    const ctx: Canvas2D = {
      fillStyle: "" as Canvas2D["fillStyle"],
      strokeStyle: "" as Canvas2D["strokeStyle"],
      lineWidth: 0,
      clearRect: () => calls.push("clear"),
      beginPath: () => calls.push("begin"),
      moveTo: () => calls.push("move"),
      lineTo: () => calls.push("line"),
      stroke: () => calls.push("stroke"),
      fillRect: () => calls.push("fill"),
    };
    const stats = renderScatter(ctx, model, 800, 400, { scale: 10, offsetX: 0, offsetY: 0 });
    expect(stats.polylineVertices).toBe(21);
    expect(stats.drawnPoints).toBe(page.ids.length);
    expect(calls.filter((c) => c === "line").length).toBe(20); // 21 vertices, 20 segments
  });

  it("maps similarity 1 to the lightest shade", () => {
    const sim = fixture<SimilarityPage>("similarity");
    const byId = new Map<number, number>();
    sim.ids.forEach((id, i) => byId.set(id, sim.scores[i]));
    const model = scatterModel(page.ids, page.xy, byId);
    const selected = model.points.find((p) => p.id === 0)!;
    expect(byId.get(0)).toBe(1);
    for (const p of model.points) {
      expect(selected.lightness).toBeGreaterThanOrEqual(p.lightness);
    }
    expect(similarityToLightness(1)).toBeGreaterThan(similarityToLightness(0.99));
  });

  it("decimates above the level-of-detail budget and not below", () => {
    const n = LOD_BUDGET + 5000;
    const ids = Array.from({ length: n }, (_, i) => i);
    const xy = ids.map((i) => [Math.cos(i), Math.sin(i)]);
    const big = scatterModel(ids, xy);
    expect(big.decimated).toBe(true);
    expect(big.drawOrder.length).toBe(LOD_BUDGET);
    const small = scatterModel(page.ids, page.xy);
    expect(small.decimated).toBe(false);
    expect(small.drawOrder.length).toBe(page.ids.length);
  });
});

describe("output panel", () => {
  it("is disabled with a hint when nothing is anchored", () => {
    const model = panelModel(null, meta.output_names, {}, meta.stats.constant_outputs);
    expect(model.enabled).toBe(false);
    expect(model.hint).toMatch(/select a record/);
  });

  it("renders the anchored record's outputs byte-equal", () => {
    const search = fixture<HitsResponse>("search_anchored");
    const select = fixture<StateResponse>("select");
    const anchored = search.hits.find((h) => h.id === select.state.record_id)!;
    const model = panelModel(
      anchored.output, meta.output_names, select.state.adjustments,
      meta.stats.constant_outputs);
    expect(model.enabled).toBe(true);
    expect(model.rows.length).toBe(64);
    expect(model.rows.map((r) => r.value)).toStrictEqual(anchored.output);
    expect(model.rows.every((r) => !r.adjusted)).toBe(true);
  });

  it("marks adjusted rows with their verbatim target", () => {
    const search = fixture<HitsResponse>("search_anchored");
    const target = fixture<StateResponse>("target");
    const anchored = search.hits.find((h) => h.id === target.state.record_id)!;
    const model = panelModel(
      anchored.output, meta.output_names, target.state.adjustments,
      meta.stats.constant_outputs);
    const adjusted = model.rows.filter((r) => r.adjusted);
    expect(adjusted.map((r) => r.index)).toStrictEqual([3]);
    expect(adjusted[0].target).toBe(target.state.adjustments["3"]);
    expect(model.rows[4].target).toBeUndefined();
  });

  it("lists suggestions verbatim", () => {
    const suggest = fixture<HitsResponse>("suggest");
    const list = suggestionList(suggest.hits);
    expect(list.map((s) => s.id)).toStrictEqual(suggest.hits.map((h) => h.id));
    expect(list[0].output).toStrictEqual(suggest.hits[0].output);
  });
});

describe("interpolation view", () => {
  const interp = fixture<InterpolateResponse>("interpolate");
  const interp9 = fixture<InterpolateResponse>("interpolate9");
  const points = fixture<Record<string, PointResponse>>("points");

  it("vertex count equals the step count for both recorded paths", () => {
    expect(interpolationModel(interp.path, meta.output_names).vertexCount).toBe(21);
    expect(interpolationModel(interp9.path, meta.output_names).vertexCount).toBe(9);
  });

  it("lambda ticks descend from 1 to 0 with endpoint labels", () => {
    const model = interpolationModel(interp.path, meta.output_names);
    const lambdas = model.ticks.map((t) => t.lambda);
    expect(lambdas[0]).toBe(1);
    expect(lambdas[lambdas.length - 1]).toBe(0);
    for (let i = 1; i < lambdas.length; i++) expect(lambdas[i]).toBeLessThan(lambdas[i - 1]);
    expect(model.leftLabel).toBe("x0 (lambda = 1)");
    expect(model.rightLabel).toBe("x1 (lambda = 0)");
  });

  it("shows 8 sparklines by default and 64 when expanded", () => {
    expect(interpolationModel(interp.path, meta.output_names).sparklines.length)
      .toBe(DEFAULT_SPARKLINES);
    expect(interpolationModel(interp.path, meta.output_names, undefined, true)
      .sparklines.length).toBe(64);
  });

  it("sparkline series are byte-equal to the predicted columns", () => {
    const model = interpolationModel(interp.path, meta.output_names, undefined, true);
    for (const line of model.sparklines) {
      expect(line.values).toStrictEqual(interp.path.map((s) => s.predicted[line.outputIndex]));
    }
  });

  it("default sparklines are the largest relative movers", () => {
    const all = interpolationModel(interp.path, meta.output_names, undefined, true).sparklines;
    const top = interpolationModel(interp.path, meta.output_names).sparklines;
    const expected = all.slice(0, DEFAULT_SPARKLINES).map((l) => l.outputIndex);
    expect(top.map((l) => l.outputIndex)).toStrictEqual(expected);
  });

  it("joins snapped series from point lookups verbatim", () => {
    const byId = new Map<number, number[]>();
    for (const [id, body] of Object.entries(points)) byId.set(Number(id), body.output);
    const model = interpolationModel(interp9.path, meta.output_names, byId, true);
    for (const line of model.sparklines) {
      expect(line.snapped).toStrictEqual(
        interp9.path.map((s) => points[String(s.snapped_id)].output[line.outputIndex]));
    }
  });

  it("sparkline geometry stays in the unit box", () => {
    const model = interpolationModel(interp.path, meta.output_names);
    for (const line of model.sparklines) {
      for (const [x, y] of sparklinePoints(line)) {
        expect(x).toBeGreaterThanOrEqual(0);
        expect(x).toBeLessThanOrEqual(1);
        expect(y).toBeGreaterThanOrEqual(0);
        expect(y).toBeLessThanOrEqual(1);
      }
    }
  });
});

describe("commit consistency", () => {
  it("the committed state mirrors the chosen path step byte-equal", () => {
    const interp = fixture<InterpolateResponse>("interpolate");
    const commit = fixture<StateResponse>("commit");
    const step = interp.path[10];
    expect(commit.state.record_id).toBe(step.snapped_id);
    expect(commit.state.mixture).toStrictEqual(step.input);
    expect(commit.state.adjustments).toStrictEqual({});
  });
});
