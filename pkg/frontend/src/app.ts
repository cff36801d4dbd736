/** Controller: wires the API client, the view model and the renderer.
 *
 * Sends are serialized: one in-flight request per session, input disabled
 * while it runs. A conflict re-enables input with a toast; a network failure
 * keeps the utterance behind a retry button so no accepted input is lost.
 */

import { ApiClient, ConflictError } from "./client.js";
import {
  ChatViewModel,
  applyCreated,
  applySnapshot,
  applyTurn,
  initialViewModel,
  inputEnabled,
} from "./model.js";
import { render } from "./view.js";

export class ChatApp {
  readonly view: ChatViewModel;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    domain: string,
  ) {
    this.view = initialViewModel(domain);
    this.root.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>("#message-input");
      if (input && input.value.trim()) {
        void this.sendMessage(input.value);
      }
    });
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.id === "retry-button" && this.view.retryText !== null) {
        void this.retry();
      }
    });
  }

  async start(): Promise<void> {
    try {
      const created = await this.client.createSession(this.view.domain);
      applyCreated(this.view, created.session_id, created.turn);
      await this.refreshSnapshot();
    } catch (err) {
      this.view.error = `could not create session: ${String(err)}`;
    }
    this.renderNow();
  }

  async sendMessage(text: string): Promise<void> {
    if (!inputEnabled(this.view) || this.view.sessionId === null) return;
    this.view.sendInFlight = true;
    this.renderNow();
    try {
      const turn = await this.client.postMessage(this.view.sessionId, text);
      applyTurn(this.view, text, turn);
      await this.refreshSnapshot();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.view.toast = `the engine is not expecting input: ${err.message}`;
      } else {
        this.view.toast = "network failure; your message was not delivered";
        this.view.retryText = text;
      }
    } finally {
      this.view.sendInFlight = false;
      this.renderNow();
    }
  }

  async retry(): Promise<void> {
    const text = this.view.retryText;
    if (text === null) return;
    this.view.retryText = null;
    this.view.toast = null;
    await this.sendMessage(text);
  }

  private async refreshSnapshot(): Promise<void> {
    if (this.view.sessionId === null) return;
    try {
      applySnapshot(this.view, await this.client.getState(this.view.sessionId));
    } catch (err) {
      this.view.error = `malformed state snapshot: ${String(err)}`;
    }
  }

  renderNow(): void {
    try {
      render(this.root, this.view);
    } catch (err) {
      // rendering must never take the page down with it
      this.root.textContent = "";
      const banner = document.createElement("div");
      banner.className = "error-banner";
      banner.setAttribute("data-testid", "error-banner");
      banner.textContent = `render failed: ${String(err)}`;
      this.root.appendChild(banner);
    }
  }
}
