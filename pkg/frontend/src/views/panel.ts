/** Output-target panel: the anchored record's 64 outputs, editable targets,
 *  and the suggestion list. Values are shown exactly as the server sent them. */

import type { Hit } from "../types.js";

export interface PanelRow {
  index: number;
  name: string;
  /** current simulated output of the anchored record, verbatim */
  value: number;
  /** pending target, verbatim from session state; undefined when untouched */
  target?: number;
  adjusted: boolean;
  constant: boolean;
}

export interface PanelModel {
  rows: PanelRow[];
  enabled: boolean;
  hint: string | null;
}

export function panelModel(
  output: number[] | null,
  outputNames: string[],
  adjustments: Record<string, number>,
  constantOutputs: boolean[],
): PanelModel {
  if (output === null) {
    return {
      rows: [],
      enabled: false,
      hint: "select a record from the search results to adjust output targets",
    };
  }
  const rows = output.map((value, index) => {
    const key = String(index);
    const adjusted = Object.prototype.hasOwnProperty.call(adjustments, key);
    const row: PanelRow = {
      index,
      name: outputNames[index] ?? `out ${index}`,
      value,
      adjusted,
      constant: constantOutputs[index] ?? false,
    };
    if (adjusted) row.target = adjustments[key];
    return row;
  });
  return { rows, enabled: true, hint: null };
}

export interface SuggestionItem {
  id: number;
  distance: number;
  /** verbatim outputs for preview */
  output: number[];
}

export function suggestionList(hits: Hit[]): SuggestionItem[] {
  return hits.map((h) => ({ id: h.id, distance: h.distance, output: h.output }));
}
