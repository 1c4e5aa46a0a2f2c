/** Completion-only loop counting for looping stimulus playback.
 *
 * A loop counts when the video fires `ended` after playing through without
 * the viewer seeking. Skips invalidate the pass, and attaching twice to the
 * same element never double-counts a playback.
 */

export interface VideoLike {
  addEventListener(type: string, listener: () => void): void;
  removeEventListener(type: string, listener: () => void): void;
  currentTime: number;
}

const ATTACHED = new WeakSet<VideoLike>();

export function attachLoopCounter(video: VideoLike, onComplete: () => void): () => void {
  if (ATTACHED.has(video)) {
    throw new Error("loop counter already attached to this element");
  }
  ATTACHED.add(video);

  let tainted = false; // viewer seeked during the current pass

  const onSeeking = () => {
    tainted = true;
  };
  const onEnded = () => {
    if (!tainted) onComplete();
    tainted = false; // the element rewinds for the next pass
  };
  const onPlay = () => {
    // a fresh pass from the start clears the taint; resuming mid-way keeps it
    if (video.currentTime < 0.25) tainted = false;
  };

  video.addEventListener("seeking", onSeeking);
  video.addEventListener("ended", onEnded);
  video.addEventListener("play", onPlay);

  return () => {
    ATTACHED.delete(video);
    video.removeEventListener("seeking", onSeeking);
    video.removeEventListener("ended", onEnded);
    video.removeEventListener("play", onPlay);
  };
}

/** Re-rendering guard: attach only if this element is not already counted. */
export function ensureLoopCounter(video: VideoLike, onComplete: () => void): (() => void) | null {
  if (ATTACHED.has(video)) return null;
  return attachLoopCounter(video, onComplete);
}
