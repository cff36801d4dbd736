/** DOM rendering: transcript with entity grids, composer, and the state inspector. */

import { ChatViewModel, inputEnabled } from "./model.js";
import { FLAG_FIELDS } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Lines that look like "a | b | c" render as grid rows instead of prose. */
function renderMessageBody(text: string): HTMLElement {
  const body = el("div", "message-body");
  const lines = text.split("\n");
  let grid: string[][] = [];

  const flushGrid = () => {
    if (!grid.length) return;
    const table = el("table", "entity-grid");
    table.setAttribute("data-testid", "entity-grid");
    const [header, ...rows] = grid;
    const thead = el("thead");
    const headRow = el("tr");
    for (const cell of header ?? []) headRow.appendChild(el("th", undefined, cell));
    thead.appendChild(headRow);
    table.appendChild(thead);
    const tbody = el("tbody");
    for (const cells of rows) {
      const tr = el("tr");
      for (const cell of cells) tr.appendChild(el("td", undefined, cell));
      tbody.appendChild(tr);
    }
    table.appendChild(tbody);
    body.appendChild(table);
    grid = [];
  };

  for (const line of lines) {
    if (line.includes(" | ")) {
      grid.push(line.split(" | "));
    } else {
      flushGrid();
      if (line.trim()) body.appendChild(el("p", undefined, line));
    }
  }
  flushGrid();
  return body;
}

function renderTranscript(view: ChatViewModel): HTMLElement {
  const log = el("div", "transcript");
  log.id = "transcript";
  if (!view.transcript.length) {
    const placeholder = el("p", "placeholder", "Start the conversation below.");
    placeholder.setAttribute("data-testid", "placeholder");
    log.appendChild(placeholder);
    return log;
  }
  for (const entry of view.transcript) {
    const bubble = el("div", `message ${entry.speaker}`);
    bubble.setAttribute("data-speaker", entry.speaker);
    bubble.appendChild(el("span", "speaker", entry.speaker === "tod" ? "TOD" : "You"));
    bubble.appendChild(renderMessageBody(entry.text));
    log.appendChild(bubble);
  }
  return log;
}

function renderComposer(view: ChatViewModel): HTMLElement {
  const form = el("form", "composer");
  form.id = "composer";
  const input = el("input");
  input.id = "message-input";
  input.type = "text";
  input.placeholder = view.completed ? "conversation completed" : "type a message";
  input.disabled = !inputEnabled(view);
  const button = el("button", undefined, "Send");
  button.id = "send-button";
  button.type = "submit";
  button.disabled = !inputEnabled(view);
  form.appendChild(input);
  form.appendChild(button);
  return form;
}

function renderNotices(view: ChatViewModel): HTMLElement {
  const box = el("div", "notices");
  if (view.error) {
    const banner = el("div", "error-banner", view.error);
    banner.setAttribute("data-testid", "error-banner");
    box.appendChild(banner);
  }
  if (view.toast) {
    const toast = el("div", "toast", view.toast);
    toast.setAttribute("data-testid", "toast");
    box.appendChild(toast);
  }
  if (view.retryText !== null) {
    const retry = el("button", "retry", "Retry last message");
    retry.id = "retry-button";
    box.appendChild(retry);
  }
  return box;
}

function renderFinalSlots(view: ChatViewModel): HTMLElement | null {
  if (!view.completed || !view.finalSlots) return null;
  const chips = el("div", "final-slots");
  chips.setAttribute("data-testid", "final-slots");
  for (const [caption, value] of Object.entries(view.finalSlots)) {
    chips.appendChild(el("span", "chip", `${caption}: ${value}`));
  }
  return chips;
}

function renderInspector(view: ChatViewModel): HTMLElement {
  const aside = el("aside", "inspector");
  aside.id = "inspector";
  aside.appendChild(el("h2", undefined, "Information state"));
  const snapshot = view.snapshot;
  if (!snapshot) {
    aside.appendChild(el("p", "placeholder", "No snapshot yet."));
    return aside;
  }
  try {
    const flags = el("dl", "flags");
    for (const field of FLAG_FIELDS) {
      flags.appendChild(el("dt", undefined, field));
      const value = el("dd", `flag flag-${snapshot.state[field]}`, snapshot.state[field]);
      value.setAttribute("data-flag", field);
      flags.appendChild(value);
    }
    aside.appendChild(flags);

    const slots = el("dl", "slots");
    slots.setAttribute("data-testid", "slot-map");
    for (const [caption, value] of Object.entries(snapshot.state.predefined_slots)) {
      slots.appendChild(el("dt", undefined, caption));
      slots.appendChild(el("dd", undefined, value ? value.normalized : "none"));
    }
    aside.appendChild(slots);

    aside.appendChild(el("p", "text-part", `text_part: ${snapshot.state.text_part}`));

    const wrongs = el("ul", "wrong-values");
    wrongs.setAttribute("data-testid", "wrong-values");
    for (const [caption, raw] of snapshot.state.wrong_or_out_of_domain_values_list) {
      wrongs.appendChild(el("li", undefined, `${caption}: ${raw}`));
    }
    aside.appendChild(wrongs);

    const trace = el("ol", "move-trace");
    trace.setAttribute("data-testid", "move-trace");
    for (const [cycle, phase, move] of snapshot.move_trace) {
      trace.appendChild(el("li", undefined, `${cycle}.${phase} ${move}`));
    }
    aside.appendChild(trace);
  } catch (err) {
    const banner = el("div", "error-banner", `inspector failed: ${String(err)}`);
    banner.setAttribute("data-testid", "error-banner");
    aside.appendChild(banner);
  }
  return aside;
}

/** Re-render the whole app into the root; cheap at chat scale. */
export function render(root: HTMLElement, view: ChatViewModel): void {
  root.textContent = "";
  const header = el("header");
  header.appendChild(el("h1", undefined, `istod chat — ${view.domain}`));
  if (view.sessionId) {
    header.appendChild(el("span", "session-id", view.sessionId));
  }
  root.appendChild(header);
  root.appendChild(renderNotices(view));
  const main = el("main");
  const chat = el("section", "chat");
  chat.appendChild(renderTranscript(view));
  const finalSlots = renderFinalSlots(view);
  if (finalSlots) chat.appendChild(finalSlots);
  chat.appendChild(renderComposer(view));
  main.appendChild(chat);
  main.appendChild(renderInspector(view));
  root.appendChild(main);
}
