/** Participant flow gating against a scripted service stub.
 *
 * The stub mirrors the service's session rules (loop counters, phase gates,
 * advisory warnings, auto-completion) so the client's derived state can be
 * checked call by call without a network.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiError, type ResponseDraft, type SessionApi, type SessionDoc } from "../src/api.js";
import { ParticipantFlow } from "../src/flow.js";
import { buildFamiliarityForm, buildResponseForm, type AreaOption } from "../src/forms.js";
import { attachLoopCounter, ensureLoopCounter } from "../src/player.js";

const SEQS = Array.from({ length: 9 }, (_, i) => `seq-${String(i + 1).padStart(2, "0")}`);
const AREAS = SEQS.map((s) => s.replace("seq-", "area-"));
const FAM_TARGET = 2;
const DEPTH_TARGET = 5;

type PhaseName = SessionDoc["phase"];

class StubApi implements SessionApi {
  phase: PhaseName = "pre_viewing";
  famSubmitted = false;
  famLoops = new Map<string, number>();
  depthLoops = new Map<string, number>();
  responses = new Map<string, ResponseDraft>();

  private reject(status: number, reason: string): never {
    throw new ApiError(status, reason, reason);
  }

  private doc(extra: Partial<SessionDoc> = {}): SessionDoc {
    const responded = [...this.responses.keys()].sort();
    return {
      participant_id: "p1",
      study_id: "stub",
      phase: this.phase,
      phase_started_at: "",
      sequence_order: [...SEQS],
      familiarity_submitted: this.famSubmitted,
      familiarization_loops: Object.fromEntries(SEQS.map((s) => [s, this.famLoops.get(s) ?? 0])),
      familiarization_loops_completed: Math.min(...SEQS.map((s) => this.famLoops.get(s) ?? 0)),
      familiarization_target: FAM_TARGET,
      in_depth_loops: Object.fromEntries(SEQS.map((s) => [s, this.depthLoops.get(s) ?? 0])),
      in_depth_loop_target: DEPTH_TARGET,
      current_sequence:
        this.phase === "in_depth" ? (SEQS.find((s) => !this.responses.has(s)) ?? null) : null,
      responses_submitted: responded,
      ...extra,
    };
  }

  async getSession(): Promise<SessionDoc> {
    return this.doc();
  }

  async submitFamiliarity(_pid: string, profile: Record<string, string>): Promise<SessionDoc> {
    if (this.phase !== "pre_viewing") this.reject(409, "wrong_phase");
    if (Object.keys(profile).length !== AREAS.length) this.reject(400, "incomplete_profile");
    this.famSubmitted = true;
    this.phase = "familiarization";
    return this.doc();
  }

  async recordLoop(_pid: string, sequenceId: string): Promise<SessionDoc> {
    if (!SEQS.includes(sequenceId)) this.reject(404, "unknown_sequence");
    if (this.phase === "familiarization") {
      this.famLoops.set(sequenceId, (this.famLoops.get(sequenceId) ?? 0) + 1);
    } else if (this.phase === "in_depth") {
      this.depthLoops.set(sequenceId, (this.depthLoops.get(sequenceId) ?? 0) + 1);
    } else {
      this.reject(409, "wrong_phase");
    }
    return this.doc();
  }

  async advancePhase(): Promise<SessionDoc> {
    if (this.phase === "pre_viewing") this.reject(409, "familiarity_required");
    if (this.phase === "familiarization") {
      if (SEQS.some((s) => (this.famLoops.get(s) ?? 0) < FAM_TARGET)) {
        this.reject(409, "gate_unmet");
      }
      this.phase = "in_depth";
    } else if (this.phase === "in_depth") {
      if (this.responses.size < SEQS.length) this.reject(409, "gate_unmet");
      this.phase = "complete";
    } else {
      this.reject(409, "wrong_phase");
    }
    return this.doc();
  }

  async submitResponse(_pid: string, draft: ResponseDraft): Promise<SessionDoc> {
    if (this.phase !== "in_depth") this.reject(409, "wrong_phase");
    if (!SEQS.includes(draft.sequence_id)) this.reject(404, "unknown_sequence");
    const amended = this.responses.has(draft.sequence_id);
    this.responses.set(draft.sequence_id, draft);
    const warnings =
      (draft.loops_viewed ?? this.depthLoops.get(draft.sequence_id) ?? 0) < DEPTH_TARGET
        ? ["below_loop_target"]
        : [];
    if (!amended && this.responses.size === SEQS.length) this.phase = "complete";
    return this.doc({ warnings, amended });
  }
}

async function flowInFamiliarization(stub: StubApi): Promise<ParticipantFlow> {
  const flow = await ParticipantFlow.resume(stub, "p1");
  await flow.submitFamiliarity(Object.fromEntries(AREAS.map((a) => [a, "quick_visits"])));
  return flow;
}

async function flowInDepth(stub: StubApi): Promise<ParticipantFlow> {
  const flow = await flowInFamiliarization(stub);
  for (const seq of SEQS) {
    for (let i = 0; i < FAM_TARGET; i++) await flow.playbackCompleted(seq);
  }
  await flow.advance();
  return flow;
}

describe("familiarization gating", () => {
  let stub: StubApi;
  beforeEach(() => {
    stub = new StubApi();
  });

  it("enables advance at exactly 18 completions, never earlier", async () => {
    const flow = await flowInFamiliarization(stub);
    expect(flow.advanceEnabled).toBe(false);
    // two full passes over the playlist, checking after every completion
    const playlist = [...SEQS, ...SEQS];
    for (let n = 0; n < playlist.length; n++) {
      await flow.playbackCompleted(playlist[n]!);
      expect(flow.totalCompletions).toBe(n + 1);
      expect(flow.advanceEnabled).toBe(n + 1 === 18);
    }
    await flow.advance();
    expect(flow.phase).toBe("in_depth");
  });

  it("stays disabled when 18 completions skew onto eight sequences", async () => {
    const flow = await flowInFamiliarization(stub);
    const skewed = SEQS.slice(0, 8);
    for (let i = 0; i < 18; i++) {
      await flow.playbackCompleted(skewed[i % skewed.length]!);
    }
    expect(flow.totalCompletions).toBe(18);
    expect(flow.advanceEnabled).toBe(false);
    await expect(flow.advance()).rejects.toMatchObject({ reason: "gate_unmet" });
  });

  it("the service rejects an early advance and the flow stays put", async () => {
    const flow = await flowInFamiliarization(stub);
    for (let i = 0; i < 17; i++) await flow.playbackCompleted(SEQS[i % 9]!);
    await expect(flow.advance()).rejects.toMatchObject({ reason: "gate_unmet" });
    expect(flow.phase).toBe("familiarization");
  });
});

describe("in-depth advisory badge", () => {
  it("flags a submission below five loops", async () => {
    const stub = new StubApi();
    const flow = await flowInDepth(stub);
    const warnings = await flow.submitResponse({
      sequence_id: SEQS[0]!,
      guessed_area_id: AREAS[3]!,
      q2: "",
      q3: "",
      q4: "",
      q5: "",
      loops_viewed: 3,
    });
    expect(warnings).toContain("below_loop_target");

    const form = buildResponseForm(
      document,
      SEQS[0]!,
      AREAS.map((a): AreaOption => ({ area_id: a, display_name: a })),
      DEPTH_TARGET,
      window.localStorage,
      () => {},
    );
    expect(form.advisoryBadge.hidden).toBe(true);
    form.showWarnings(warnings);
    expect(form.advisoryBadge.hidden).toBe(false);
  });

  it("stays quiet at the five-loop target", async () => {
    const stub = new StubApi();
    const flow = await flowInDepth(stub);
    const warnings = await flow.submitResponse({
      sequence_id: SEQS[1]!,
      guessed_area_id: null,
      q2: "",
      q3: "",
      q4: "",
      q5: "",
      loops_viewed: 5,
    });
    expect(warnings).toEqual([]);
  });
});

describe("reload restores flow state from the session endpoint alone", () => {
  it("mid-familiarization", async () => {
    const stub = new StubApi();
    const flow = await flowInFamiliarization(stub);
    for (let i = 0; i < 7; i++) await flow.playbackCompleted(SEQS[i % 9]!);

    const reloaded = await ParticipantFlow.resume(stub, "p1");
    expect(reloaded.snapshot()).toEqual(flow.snapshot());
    expect(reloaded.totalCompletions).toBe(7);
    expect(reloaded.advanceEnabled).toBe(false);
  });

  it("mid in-depth, same next sequence", async () => {
    const stub = new StubApi();
    const flow = await flowInDepth(stub);
    for (const seq of SEQS.slice(0, 4)) {
      await flow.submitResponse({
        sequence_id: seq,
        guessed_area_id: AREAS[0]!,
        q2: "x",
        q3: "",
        q4: "",
        q5: "",
        loops_viewed: 5,
      });
    }
    const reloaded = await ParticipantFlow.resume(stub, "p1");
    expect(reloaded.snapshot()).toEqual(flow.snapshot());
    expect(reloaded.snapshot().currentSequence).toBe(SEQS[4]);
    expect(reloaded.snapshot().responsesSubmitted).toHaveLength(4);
  });

  it("ninth response completes the session", async () => {
    const stub = new StubApi();
    const flow = await flowInDepth(stub);
    for (const seq of SEQS) {
      await flow.submitResponse({
        sequence_id: seq,
        guessed_area_id: AREAS[0]!,
        q2: "",
        q3: "",
        q4: "",
        q5: "",
        loops_viewed: 5,
      });
    }
    expect(flow.phase).toBe("complete");
    const reloaded = await ParticipantFlow.resume(stub, "p1");
    expect(reloaded.snapshot().complete).toBe(true);
  });
});

describe("familiarity form", () => {
  const areas: AreaOption[] = AREAS.map((a) => ({ area_id: a, display_name: a }));

  function pick(root: HTMLElement, areaId: string, value = "quick_visits"): void {
    const input = root.querySelector<HTMLInputElement>(
      `input[name="fam-${areaId}"][value="${value}"]`,
    )!;
    input.checked = true;
    input.dispatchEvent(new Event("change", { bubbles: true }));
  }

  it("submit enables only when every area is answered", () => {
    const form = buildFamiliarityForm(document, areas, () => {});
    expect(form.submitButton.disabled).toBe(true);
    for (const area of AREAS.slice(0, 8)) pick(form.root, area);
    expect(form.submitButton.disabled).toBe(true);
    expect(form.highlightMissing()).toEqual([AREAS[8]]);
    expect(
      form.root.querySelector(`[data-area-id="${AREAS[8]}"]`)!.classList.contains("missing"),
    ).toBe(true);
    pick(form.root, AREAS[8]!);
    expect(form.submitButton.disabled).toBe(false);
    expect(form.highlightMissing()).toEqual([]);
  });

  it("submit hands over the full profile", () => {
    let got: Record<string, string> | null = null;
    const form = buildFamiliarityForm(document, areas, (profile) => {
      got = profile;
    });
    for (const area of AREAS) pick(form.root, area, "continuous_residence");
    form.root.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    expect(got).not.toBeNull();
    expect(Object.keys(got!)).toHaveLength(9);
    expect(got!["area-01"]).toBe("continuous_residence");
  });
});

describe("loop counting", () => {
  function fakeVideo(): HTMLVideoElement {
    return document.createElement("video");
  }

  it("counts completed playbacks only", () => {
    const video = fakeVideo();
    let count = 0;
    attachLoopCounter(video, () => count++);
    video.dispatchEvent(new Event("play"));
    video.dispatchEvent(new Event("ended"));
    video.dispatchEvent(new Event("play"));
    video.dispatchEvent(new Event("ended"));
    expect(count).toBe(2);
  });

  it("a mid-video skip voids the pass", () => {
    const video = fakeVideo();
    let count = 0;
    attachLoopCounter(video, () => count++);
    video.dispatchEvent(new Event("play"));
    video.dispatchEvent(new Event("seeking"));
    video.dispatchEvent(new Event("ended"));
    expect(count).toBe(0);
    // the next untouched pass counts again
    video.dispatchEvent(new Event("play"));
    video.dispatchEvent(new Event("ended"));
    expect(count).toBe(1);
  });

  it("re-render never double-attaches", () => {
    const video = fakeVideo();
    let count = 0;
    const detach = ensureLoopCounter(video, () => count++);
    expect(detach).not.toBeNull();
    expect(ensureLoopCounter(video, () => count++)).toBeNull();
    expect(() => attachLoopCounter(video, () => count++)).toThrow(/already attached/);
    video.dispatchEvent(new Event("play"));
    video.dispatchEvent(new Event("ended"));
    expect(count).toBe(1);
    detach!();
    // after an explicit detach a fresh counter may attach again
    expect(ensureLoopCounter(video, () => count++)).not.toBeNull();
  });
});
