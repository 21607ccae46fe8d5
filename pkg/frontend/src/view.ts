// DOM layer: renders a StudySession into a root element.
//
// Layout mirrors the study protocol: instruction on top, candidates in a
// side-by-side grid (2x2 for four candidates), one rank control per
// candidate plus keyboard entry (focus a card, press 1..K).

import { StudySession, ViewState, canSubmit } from "./state.js";

export function mountStudy(root: HTMLElement, session: StudySession): void {
  root.classList.add("study-root");
  session.subscribe((state) => render(root, session, state));
  root.addEventListener("keydown", (event) => {
    const key = Number.parseInt(event.key, 10);
    if (!Number.isInteger(key)) return;
    const card = (event.target as HTMLElement).closest<HTMLElement>("[data-slot]");
    if (!card) return;
    const slot = Number.parseInt(card.dataset.slot ?? "", 10);
    if (session.assignRank(slot, key)) event.preventDefault();
  });
}

function render(root: HTMLElement, session: StudySession, state: ViewState): void {
  root.textContent = "";
  switch (state.phase) {
    case "loading":
      root.append(el("p", "status", "loading…"));
      return;
    case "error":
      root.append(el("p", "status error", state.message));
      root.append(
        button("retry", "Retry", () => {
          void session.loadNext();
        }),
      );
      return;
    case "done": {
      const doneBox = el("div", "done-screen");
      doneBox.append(el("h2", "", "All items ranked"));
      doneBox.append(el("p", "", "Thanks! You can close this tab."));
      root.append(doneBox);
      return;
    }
    default:
      break;
  }

  const item = state.item;
  if (!item) return;

  const header = el("div", "header");
  header.append(el("h2", "instruction", item.instruction || item.itemId));
  header.append(
    el("p", "progress", `Item ${item.position + 1} of ${item.total}`),
  );
  if (state.message) header.append(el("p", "status error", state.message));
  if (state.phase === "conflict") {
    header.append(
      el("p", "status", "This item was already ranked; showing the stored ranks."),
    );
  }
  root.append(header);

  const grid = el("div", "candidate-grid");
  grid.classList.add(item.k === 4 ? "grid-2x2" : "grid-row");
  for (const candidate of item.candidates) {
    const stored = state.storedRanks?.[String(candidate.slot)] ?? null;
    const assigned =
      state.phase === "conflict" ? stored : (state.ranks[candidate.slot] ?? null);
    grid.append(candidateCard(session, state, candidate.slot, candidate.imageRef, assigned, item.k));
  }
  root.append(grid);

  const footer = el("div", "footer");
  if (state.phase === "conflict") {
    footer.append(
      button("continue", "Continue", () => {
        void session.acknowledgeConflict();
      }),
    );
  } else {
    const submit = button("submit", "Submit ranks", () => {
      void session.submit();
    });
    submit.disabled = !canSubmit(state);
    footer.append(submit);
    footer.append(
      el("p", "hint", `Focus a candidate and press 1–${item.k} (1 = best). Ties allowed.`),
    );
  }
  root.append(footer);
}

function candidateCard(
  session: StudySession,
  state: ViewState,
  slot: number,
  imageRef: string,
  assigned: number | null,
  k: number,
): HTMLElement {
  const card = el("div", "candidate");
  card.dataset.slot = String(slot);
  card.tabIndex = 0;

  const img = document.createElement("img");
  img.src = imageRef;
  img.alt = `candidate ${slot + 1}`;
  card.append(img);

  const controls = el("div", "rank-controls");
  const readOnly = state.phase !== "ranking";
  for (let rank = 1; rank <= k; rank += 1) {
    const b = button(
      `rank-${slot}-${rank}`,
      String(rank),
      () => {
        session.assignRank(slot, rank);
      },
    );
    b.classList.add("rank-button");
    if (assigned === rank) b.classList.add("selected");
    b.disabled = readOnly;
    controls.append(b);
  }
  card.append(controls);

  const label = el(
    "p",
    "rank-label",
    assigned === null ? "unranked" : `rank ${assigned}`,
  );
  card.append(label);
  return card;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(id: string, label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.id = id;
  b.type = "button";
  b.textContent = label;
  b.addEventListener("click", onClick);
  return b;
}
