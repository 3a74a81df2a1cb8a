// Session dashboard: step the active session chunk by chunk, flag the
// chunk-boundary equality, page through generated frames, and show the
// loop-closure readout once the session completes. At most one step
// request is in flight at a time (mirroring the server's lock), enforced
// through ConsoleState.beginStep().

import { ApiError, type GatewayClient } from './api.js';
import type { ConsoleState } from './state.js';

export function formatLoopClosure(errorM: number | null): string {
  return errorM === null ? 'loop closure: —' : `loop closure: ${errorM.toFixed(3)} m`;
}

export function formatBoundary(state: ConsoleState): string {
  switch (state.boundaryIndicator) {
    case 'none':
      return 'boundary: —';
    case 'green':
      return 'boundary: match';
    case 'red':
      return 'boundary: MISMATCH';
    case 'conflict':
      return 'boundary: CLIENT/SERVER DISAGREE';
  }
}

export class SessionPanel {
  readonly container: HTMLElement;
  private readonly client: GatewayClient;
  private readonly state: ConsoleState;

  private readonly meta: HTMLDivElement;
  private readonly stepButton: HTMLButtonElement;
  private readonly boundaryIndicator: HTMLDivElement;
  private readonly loopClosure: HTMLDivElement;
  private readonly frameViewer: HTMLImageElement;
  private readonly frameCursor: HTMLSpanElement;
  private readonly errorBox: HTMLDivElement;

  onChange: (() => void) | null = null;

  constructor(
    container: HTMLElement,
    client: GatewayClient,
    state: ConsoleState,
  ) {
    this.container = container;
    this.client = client;
    this.state = state;
    container.classList.add('session-panel');

    this.meta = el('div', 'session-meta');
    this.stepButton = el('button', 'step-button');
    this.stepButton.textContent = 'Step';
    this.boundaryIndicator = el('div', 'boundary-indicator');
    this.loopClosure = el('div', 'loop-closure-readout');
    this.frameViewer = el('img', 'frame-viewer');
    this.frameCursor = el('span', 'frame-cursor');
    this.errorBox = el('div', 'panel-error');

    const prev = el('button', 'frame-prev');
    prev.textContent = '<';
    const next = el('button', 'frame-next');
    next.textContent = '>';
    const controls = el('div', 'frame-controls');
    controls.append(prev, this.frameCursor, next);

    container.append(
      this.meta, this.stepButton, this.boundaryIndicator,
      this.loopClosure, this.frameViewer, controls, this.errorBox,
    );

    this.stepButton.addEventListener('click', () => {
      void this.step();
    });
    prev.addEventListener('click', () => {
      this.state.seekFrame(this.state.playbackCursor - 1);
      this.render();
    });
    next.addEventListener('click', () => {
      this.state.seekFrame(this.state.playbackCursor + 1);
      this.render();
    });

    this.render();
  }

  async step(): Promise<void> {
    const session = this.state.activeSession;
    if (session === null || !this.state.beginStep()) return;
    this.render();
    try {
      const step = await this.client.stepSession(session.session_id);
      this.state.recordStep(step);
      if (step.status === 'complete') {
        // Re-fetch the manifest so the readout is the server's record,
        // not a value the console carried along.
        this.state.activeSession =
          await this.client.getSession(session.session_id);
        this.state.loopClosureErrorM =
          this.state.activeSession.loop_closure_error_m;
      }
      this.errorBox.textContent = '';
    } catch (error) {
      this.state.stepFailed();
      this.errorBox.textContent =
        error instanceof ApiError
          ? `${error.code}: ${error.message}`
          : String(error);
    }
    this.render();
    this.onChange?.();
  }

  render(): void {
    const session = this.state.activeSession;
    if (session === null) {
      this.meta.textContent = 'no active session';
      this.stepButton.disabled = true;
      this.boundaryIndicator.setAttribute('data-state', 'none');
      this.boundaryIndicator.textContent = formatBoundary(this.state);
      this.loopClosure.textContent = formatLoopClosure(null);
      this.frameViewer.removeAttribute('src');
      this.frameCursor.textContent = '';
      return;
    }
    this.meta.textContent =
      `session ${session.session_id} — ${session.backend_name}, ` +
      `chunk ${session.chunks_done}/${session.chunks_total}, ` +
      `${session.frame_count} frames, ${session.status}`;
    this.stepButton.disabled =
      this.state.stepInFlight || session.status === 'complete';
    this.boundaryIndicator.setAttribute(
      'data-state', this.state.boundaryIndicator);
    this.boundaryIndicator.textContent = formatBoundary(this.state);
    this.loopClosure.textContent =
      formatLoopClosure(this.state.loopClosureErrorM);

    if (session.frame_count > 0) {
      this.frameViewer.src = this.client.frameUrl(
        session.session_id, this.state.playbackCursor);
      this.frameCursor.textContent =
        `frame ${this.state.playbackCursor + 1} / ${session.frame_count}`;
    } else {
      this.frameViewer.removeAttribute('src');
      this.frameCursor.textContent = 'no frames yet';
    }
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
