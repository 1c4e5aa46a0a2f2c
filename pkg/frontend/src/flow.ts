/** Participant flow controller.
 *
 * Holds no authority of its own: every field mirrors the last session
 * document the service returned, so reconstructing the controller from
 * GET session restores the exact flow state. The UI asks this object what
 * is currently allowed instead of tracking anything in the DOM.
 */

import type { ResponseDraft, SessionApi, SessionDoc } from "./api.js";

export interface FlowSnapshot {
  phase: SessionDoc["phase"];
  /** playlist order fixed by the service for this participant */
  sequenceOrder: string[];
  /** neutral on-screen labels, never area names */
  sequenceLabels: Record<string, string>;
  familiarizationLoops: Record<string, number>;
  familiarizationTarget: number;
  totalCompletions: number;
  advanceEnabled: boolean;
  inDepthLoops: Record<string, number>;
  inDepthLoopTarget: number;
  currentSequence: string | null;
  responsesSubmitted: string[];
  complete: boolean;
}

export class ParticipantFlow {
  private session: SessionDoc;
  /** warnings attached to the most recent submission, e.g. below_loop_target */
  lastWarnings: string[] = [];

  private constructor(
    private readonly api: SessionApi,
    session: SessionDoc,
  ) {
    this.session = session;
  }

  /** Restore a session purely from the service; used on load and reload. */
  static async resume(api: SessionApi, pid: string): Promise<ParticipantFlow> {
    return new ParticipantFlow(api, await api.getSession(pid));
  }

  static fromSession(api: SessionApi, session: SessionDoc): ParticipantFlow {
    return new ParticipantFlow(api, session);
  }

  get pid(): string {
    return this.session.participant_id;
  }

  get phase(): SessionDoc["phase"] {
    return this.session.phase;
  }

  /** Sum of completed familiarization playbacks across the playlist. */
  get totalCompletions(): number {
    return Object.values(this.session.familiarization_loops).reduce((a, b) => a + b, 0);
  }

  /** The advance control lights up only when the service would accept it:
   * every sequence at or above the familiarization target. */
  get advanceEnabled(): boolean {
    if (this.session.phase === "familiarization") {
      const target = this.session.familiarization_target;
      return this.session.sequence_order.every(
        (seq) => (this.session.familiarization_loops[seq] ?? 0) >= target,
      );
    }
    if (this.session.phase === "in_depth") {
      return this.session.sequence_order.every((seq) =>
        this.session.responses_submitted.includes(seq),
      );
    }
    return false;
  }

  snapshot(): FlowSnapshot {
    const labels: Record<string, string> = {};
    this.session.sequence_order.forEach((seq, i) => {
      labels[seq] = `Sequence ${String(i + 1).padStart(2, "0")}`;
    });
    return {
      phase: this.session.phase,
      sequenceOrder: [...this.session.sequence_order],
      sequenceLabels: labels,
      familiarizationLoops: { ...this.session.familiarization_loops },
      familiarizationTarget: this.session.familiarization_target,
      totalCompletions: this.totalCompletions,
      advanceEnabled: this.advanceEnabled,
      inDepthLoops: { ...this.session.in_depth_loops },
      inDepthLoopTarget: this.session.in_depth_loop_target,
      currentSequence: this.session.current_sequence,
      responsesSubmitted: [...this.session.responses_submitted],
      complete: this.session.phase === "complete",
    };
  }

  async submitFamiliarity(profile: Record<string, string>): Promise<void> {
    this.session = await this.api.submitFamiliarity(this.pid, profile);
  }

  /** Called by the player on each completed playback; the service owns the
   * counter and echoes it back in the session document. */
  async playbackCompleted(sequenceId: string): Promise<void> {
    this.session = await this.api.recordLoop(this.pid, sequenceId);
  }

  async advance(): Promise<void> {
    this.session = await this.api.advancePhase(this.pid);
  }

  /** Submit or amend one in-depth response. Returns the advisory warnings
   * so the form can show the below-target badge. */
  async submitResponse(draft: ResponseDraft): Promise<string[]> {
    this.session = await this.api.submitResponse(this.pid, draft);
    this.lastWarnings = this.session.warnings ?? [];
    return this.lastWarnings;
  }

  /** Re-sync from the service after a rejection left the client unsure. */
  async resync(): Promise<void> {
    this.session = await this.api.getSession(this.pid);
    this.lastWarnings = [];
  }
}
