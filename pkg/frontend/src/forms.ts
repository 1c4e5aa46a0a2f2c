/** Staged questionnaire forms, framework-free DOM. */

export const FAMILIARITY_LEVELS: [string, string][] = [
  ["not_familiar", "Not Familiar"],
  ["quick_visits", "Quick Visits"],
  ["regular_attendance", "Regular Attendance"],
  ["continuous_residence", "Continuous Residence"],
];

export interface AreaOption {
  area_id: string;
  display_name: string;
}

export interface FamiliarityFormHandle {
  root: HTMLElement;
  submitButton: HTMLButtonElement;
  /** current selections, area_id -> level */
  values(): Record<string, string>;
  /** mark still-unanswered rows; returns their area ids */
  highlightMissing(): string[];
}

/** One four-option choice per area; submit stays disabled until all answered. */
export function buildFamiliarityForm(
  doc: Document,
  areas: AreaOption[],
  onSubmit: (profile: Record<string, string>) => void,
): FamiliarityFormHandle {
  const root = doc.createElement("form");
  root.className = "familiarity-form";

  for (const area of areas) {
    const row = doc.createElement("fieldset");
    row.className = "familiarity-row";
    row.dataset.areaId = area.area_id;
    const legend = doc.createElement("legend");
    legend.textContent = area.display_name;
    row.appendChild(legend);
    for (const [value, label] of FAMILIARITY_LEVELS) {
      const wrap = doc.createElement("label");
      const input = doc.createElement("input");
      input.type = "radio";
      input.name = `fam-${area.area_id}`;
      input.value = value;
      wrap.appendChild(input);
      wrap.appendChild(doc.createTextNode(label));
      row.appendChild(wrap);
    }
    root.appendChild(row);
  }

  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = "Begin viewing";
  submit.disabled = true;
  root.appendChild(submit);

  const values = (): Record<string, string> => {
    const out: Record<string, string> = {};
    for (const area of areas) {
      const checked = root.querySelector<HTMLInputElement>(
        `input[name="fam-${area.area_id}"]:checked`,
      );
      if (checked) out[area.area_id] = checked.value;
    }
    return out;
  };

  const highlightMissing = (): string[] => {
    const have = values();
    const missing: string[] = [];
    root.querySelectorAll<HTMLElement>(".familiarity-row").forEach((row) => {
      const id = row.dataset.areaId ?? "";
      const miss = !(id in have);
      row.classList.toggle("missing", miss);
      if (miss) missing.push(id);
    });
    return missing;
  };

  root.addEventListener("change", () => {
    submit.disabled = Object.keys(values()).length !== areas.length;
    highlightMissing();
  });
  root.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const profile = values();
    if (Object.keys(profile).length !== areas.length) {
      highlightMissing();
      return;
    }
    onSubmit(profile);
  });

  return { root, submitButton: submit, values, highlightMissing };
}

export interface DraftStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface ResponseFormHandle {
  root: HTMLElement;
  submitButton: HTMLButtonElement;
  advisoryBadge: HTMLElement;
  loopDisplay: HTMLElement;
  setLoopCount(count: number): void;
  showWarnings(warnings: string[]): void;
  draft(): { guessed_area_id: string | null; q2: string; q3: string; q4: string; q5: string };
  clearDraft(): void;
}

const TEXT_QUESTIONS: [keyof ReturnType<ResponseFormHandle["draft"]> & string, string][] = [
  ["q2", "Which elements made you think of that area?"],
  ["q3", "What does the environment feel like?"],
  ["q4", "Which details stood out?"],
  ["q5", "Anything that felt out of place?"],
];

/** In-depth response form for one sequence. Submit is always available; low
 * loop counts only raise the advisory badge after the service says so.
 * Free-text drafts persist to the store until submitted. */
export function buildResponseForm(
  doc: Document,
  sequenceId: string,
  areas: AreaOption[],
  loopTarget: number,
  drafts: DraftStore,
  onSubmit: (draft: ReturnType<ResponseFormHandle["draft"]>) => void,
): ResponseFormHandle {
  const key = (field: string) => `draft:${sequenceId}:${field}`;
  const root = doc.createElement("form");
  root.className = "response-form";
  root.dataset.sequenceId = sequenceId;

  const loopDisplay = doc.createElement("p");
  loopDisplay.className = "loop-display";
  root.appendChild(loopDisplay);

  const badge = doc.createElement("span");
  badge.className = "advisory-badge";
  badge.textContent = `below the ${loopTarget}-loop target`;
  badge.hidden = true;
  root.appendChild(badge);

  const picker = doc.createElement("select");
  picker.name = "q1";
  const blank = doc.createElement("option");
  blank.value = "";
  blank.textContent = "No guess";
  picker.appendChild(blank);
  for (const area of areas) {
    const opt = doc.createElement("option");
    opt.value = area.area_id;
    opt.textContent = area.display_name;
    picker.appendChild(opt);
  }
  root.appendChild(picker);

  for (const [field, label] of TEXT_QUESTIONS) {
    const wrap = doc.createElement("label");
    wrap.appendChild(doc.createTextNode(label));
    const ta = doc.createElement("textarea");
    ta.name = field;
    ta.value = drafts.getItem(key(field)) ?? "";
    ta.addEventListener("input", () => drafts.setItem(key(field), ta.value));
    wrap.appendChild(ta);
    root.appendChild(wrap);
  }

  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = "Submit response";
  root.appendChild(submit);

  const text = (field: string): string =>
    root.querySelector<HTMLTextAreaElement>(`textarea[name="${field}"]`)?.value ?? "";

  const handle: ResponseFormHandle = {
    root,
    submitButton: submit,
    advisoryBadge: badge,
    loopDisplay,
    setLoopCount(count: number) {
      loopDisplay.textContent = `Loops watched: ${count} / ${loopTarget}`;
    },
    showWarnings(warnings: string[]) {
      badge.hidden = !warnings.includes("below_loop_target");
    },
    draft() {
      return {
        guessed_area_id: picker.value === "" ? null : picker.value,
        q2: text("q2"),
        q3: text("q3"),
        q4: text("q4"),
        q5: text("q5"),
      };
    },
    clearDraft() {
      for (const [field] of TEXT_QUESTIONS) drafts.removeItem(key(field));
    },
  };

  handle.setLoopCount(0);
  root.addEventListener("submit", (ev) => {
    ev.preventDefault();
    onSubmit(handle.draft());
  });
  return handle;
}
