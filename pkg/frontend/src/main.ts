/** Entry point: hash-routed single page.
 *
 *   #/participant/<pid>   staged evaluation flow for one session token
 *   #/dashboard/<study>   researcher dashboard
 *
 * The service origin defaults to the page origin and can be overridden with
 * ?api=http://host:port when the page is served separately.
 */

import { ApiError, StudyApi, type StimulusInfo } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { ParticipantFlow } from "./flow.js";
import { buildFamiliarityForm, buildResponseForm, type AreaOption } from "./forms.js";
import { ensureLoopCounter } from "./player.js";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return (override ?? window.location.origin).replace(/\/$/, "");
}

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function showError(root: HTMLElement, err: unknown): void {
  const msg = err instanceof ApiError ? `${err.reason}: ${err.message}` : String(err);
  root.querySelector(".flow-error")?.remove();
  const banner = el("p", "flow-error", msg);
  root.prepend(banner);
}

async function areaOptions(api: StudyApi, studyId: string): Promise<AreaOption[]> {
  // the stimuli list is the one place area ids surface pre-submission; the
  // picker shows them capitalized, playback labels never do
  const stimuli = await api.listStimuli(studyId);
  return stimuli
    .map((s) => ({ area_id: s.area_id, display_name: s.area_id.replace(/\b\w/g, (c) => c.toUpperCase()) }))
    .sort((a, b) => a.area_id.localeCompare(b.area_id));
}

function mountVideo(
  container: HTMLElement,
  stimulus: StimulusInfo,
  label: string,
  onComplete: () => void,
): void {
  const figure = el("figure", "stimulus");
  const video = document.createElement("video");
  video.src = stimulus.media_uri;
  video.controls = true;
  video.preload = "metadata";
  video.dataset.sequenceId = stimulus.sequence_id;
  const caption = el("figcaption", undefined, label);
  figure.appendChild(video);
  figure.appendChild(caption);
  container.appendChild(figure);
  ensureLoopCounter(video, onComplete);
}

async function renderParticipant(root: HTMLElement, api: StudyApi, pid: string): Promise<void> {
  const flow = await ParticipantFlow.resume(api, pid);
  const stimuliCache = new Map<string, StimulusInfo>();

  const refresh = async (): Promise<void> => {
    const snap = flow.snapshot();
    root.textContent = "";
    const header = el("header");
    header.appendChild(el("h1", undefined, "Urban sequence evaluation"));
    header.appendChild(el("p", "phase-label", `Phase: ${snap.phase.replace("_", " ")}`));
    root.appendChild(header);

    const studyId = (await api.getSession(pid)).study_id;
    if (stimuliCache.size === 0) {
      for (const s of await api.listStimuli(studyId)) stimuliCache.set(s.sequence_id, s);
    }

    if (snap.phase === "pre_viewing") {
      const areas = await areaOptions(api, studyId);
      const form = buildFamiliarityForm(document, areas, (profile) => {
        flow
          .submitFamiliarity(profile)
          .then(refresh)
          .catch((err) => {
            showError(root, err);
            void flow.resync().then(refresh);
          });
      });
      root.appendChild(form.root);
      return;
    }

    if (snap.phase === "familiarization") {
      const list = el("div", "playlist");
      for (const seq of snap.sequenceOrder) {
        const stim = stimuliCache.get(seq);
        if (!stim) continue;
        const label = `${snap.sequenceLabels[seq]} (${snap.familiarizationLoops[seq] ?? 0}/${snap.familiarizationTarget} loops)`;
        mountVideo(list, stim, label, () => void flow.playbackCompleted(seq).then(refresh));
      }
      root.appendChild(list);
      const advance = el("button", "advance") as HTMLButtonElement;
      advance.textContent = "Continue to questions";
      advance.disabled = !snap.advanceEnabled;
      advance.addEventListener("click", () => {
        flow
          .advance()
          .then(refresh)
          .catch((err) => showError(root, err));
      });
      root.appendChild(advance);
      return;
    }

    if (snap.phase === "in_depth") {
      const seq = snap.currentSequence;
      if (seq === null) {
        root.appendChild(el("p", undefined, "All sequences answered. Review or finish."));
      } else {
        const stim = stimuliCache.get(seq);
        const panel = el("div", "in-depth");
        if (stim) {
          mountVideo(panel, stim, snap.sequenceLabels[seq] ?? seq, () =>
            void flow.playbackCompleted(seq).then(refresh),
          );
        }
        const areas = await areaOptions(api, studyId);
        const form = buildResponseForm(
          document,
          seq,
          areas,
          snap.inDepthLoopTarget,
          window.localStorage,
          (draft) => {
            flow
              .submitResponse({ sequence_id: seq, ...draft })
              .then((warnings) => {
                form.showWarnings(warnings);
                form.clearDraft();
                return refresh();
              })
              .catch((err) => showError(root, err));
          },
        );
        form.setLoopCount(snap.inDepthLoops[seq] ?? 0);
        panel.appendChild(form.root);
        root.appendChild(panel);
      }
      return;
    }

    const done = el("section", "complete");
    done.appendChild(el("h2", undefined, "Session complete"));
    done.appendChild(el("p", undefined, "Thank you. All nine responses are recorded."));
    root.appendChild(done);
  };

  await refresh();
}

async function route(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const api = new StudyApi(apiBase());
  const hash = window.location.hash.replace(/^#\/?/, "");
  const [view, ...rest] = hash.split("/");
  const arg = rest.join("/");
  try {
    if (view === "participant" && arg) {
      await renderParticipant(root, api, decodeURIComponent(arg));
    } else if (view === "dashboard" && arg) {
      await new Dashboard(api, root).load(decodeURIComponent(arg));
    } else {
      root.textContent = "";
      root.appendChild(el("h1", undefined, "urbanid"));
      root.appendChild(
        el("p", undefined, "Open #/participant/<session token> or #/dashboard/<study id>."),
      );
    }
  } catch (err) {
    showError(root, err);
  }
}

window.addEventListener("hashchange", () => void route());
void route();
