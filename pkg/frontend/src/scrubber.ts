/** Result scrubber: frame index, play/pause at a fixed rate, and an A/B
 * toggle between the colorized result and the grayscale input. */

export class Scrubber {
  frame = 0;
  playing = false;
  showOriginal = false;

  constructor(
    public frameCount: number,
    private onChange: () => void = () => {},
  ) {}

  seek(t: number) {
    this.frame = Math.min(this.frameCount - 1, Math.max(0, Math.round(t)));
    this.onChange();
  }

  stepForward() {
    this.frame = this.frameCount > 0 ? (this.frame + 1) % this.frameCount : 0;
    this.onChange();
  }

  toggleOriginal() {
    this.showOriginal = !this.showOriginal;
    this.onChange();
  }

  play() {
    this.playing = true;
  }

  pause() {
    this.playing = false;
  }

  /** advance if playing; returns whether a redraw is needed */
  tick(): boolean {
    if (!this.playing || this.frameCount === 0) return false;
    this.stepForward();
    return true;
  }
}
