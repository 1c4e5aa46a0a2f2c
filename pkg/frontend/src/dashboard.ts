/** Researcher dashboard: a pure view over the report endpoints.
 *
 * Every number on screen is copied verbatim from a report row. The client
 * never ranks, rounds, or recomputes; toggles just refetch with different
 * query parameters.
 */

import type { ReportDoc, ReportQuery, StudyApi } from "./api.js";

export const MARKER_GLYPHS: Record<string, string> = {
  up: "▲",
  down: "▼",
  aligned: "◀→",
  "": "",
};

export const GROUPS = ["general", "local", "foreign"] as const;

export interface DashboardOptions {
  group: string;
  threshold: number;
  policy: string;
  k: number;
}

const DEFAULTS: DashboardOptions = { group: "general", threshold: 2, policy: "exclude", k: 3 };

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Generic report table: one column per report column, cells verbatim,
 * marker columns rendered as glyphs next to their value columns. */
function renderTable(doc: Document, report: ReportDoc): HTMLElement {
  const table = el(doc, "table", `report-table report-${report.kind}`);
  const thead = el(doc, "thead");
  const headRow = el(doc, "tr");
  for (const [name] of report.columns) {
    headRow.appendChild(el(doc, "th", undefined, name));
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = el(doc, "tbody");
  for (const row of report.rows) {
    const tr = el(doc, "tr");
    for (const [name] of report.columns) {
      const raw = row[name];
      const cell = el(doc, "td", `col-${name}`);
      if (name.endsWith("_marker")) {
        cell.textContent = MARKER_GLYPHS[String(raw)] ?? "";
        cell.dataset.marker = String(raw);
      } else {
        cell.textContent = raw === null || raw === undefined ? "" : String(raw);
      }
      tr.appendChild(cell);
    }
    const areaCell = row["area_by_accuracy"] ?? row["area_id"] ?? row["area"];
    if (typeof areaCell === "string") tr.dataset.areaId = areaCell;
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  return table;
}

function renderEmptyState(doc: Document, report: ReportDoc): HTMLElement {
  const panel = el(doc, "div", "empty-state");
  panel.appendChild(el(doc, "p", undefined, `No scorable data yet for ${report.kind} (${report.group}).`));
  return panel;
}

export class Dashboard {
  options: DashboardOptions = { ...DEFAULTS };
  private studyId = "";

  constructor(
    private readonly api: StudyApi,
    private readonly root: HTMLElement,
  ) {}

  private get doc(): Document {
    return this.root.ownerDocument;
  }

  async load(studyId: string, overrides: Partial<DashboardOptions> = {}): Promise<void> {
    this.studyId = studyId;
    this.options = { ...this.options, ...overrides };
    const query: ReportQuery = {
      group: this.options.group,
      policy: this.options.policy,
      threshold: this.options.threshold,
      k: this.options.k,
    };
    const [metrics, semantic, histogram, demographics] = await Promise.all([
      this.api.getReport(studyId, "metrics", query),
      this.api.getReport(studyId, "semantic", query),
      this.api.getReport(studyId, "histogram", query),
      this.api.getReport(studyId, "demographics", query),
    ]);
    this.render(metrics, semantic, histogram, demographics);
  }

  async setGroup(group: string): Promise<void> {
    await this.load(this.studyId, { group });
  }

  private render(
    metrics: ReportDoc,
    semantic: ReportDoc,
    histogram: ReportDoc,
    demographics: ReportDoc,
  ): void {
    const doc = this.doc;
    this.root.textContent = "";

    const toggle = el(doc, "nav", "group-toggle");
    for (const group of GROUPS) {
      const btn = el(doc, "button", group === this.options.group ? "active" : "") as HTMLButtonElement;
      btn.textContent = group;
      btn.dataset.group = group;
      btn.addEventListener("click", () => void this.setGroup(group));
      toggle.appendChild(btn);
    }
    this.root.appendChild(toggle);

    for (const [title, report] of [
      ["Identifiability and familiarity", metrics],
      ["Top semantic elements", semantic],
      ["Per-participant accuracy", histogram],
      ["Cohort", demographics],
    ] as [string, ReportDoc][]) {
      const section = el(doc, "section", `panel panel-${report.kind}`);
      section.appendChild(el(doc, "h2", undefined, title));
      if ("insufficient_data" in report.meta) {
        section.appendChild(renderEmptyState(doc, report));
      } else {
        section.appendChild(renderTable(doc, report));
      }
      this.root.appendChild(section);
    }
  }
}
