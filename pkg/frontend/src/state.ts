// Study view-state machine, kept free of DOM so the logic tests run bare.
//
// Protocol rules enforced here:
//  * the server decides which item is pending (reloads land on the same item);
//  * candidates render in server slot order and are never reordered locally;
//  * submit stays disabled until every candidate has a rank (ties allowed);
//  * ranks only advance once the server acks, so nothing exists client-side
//    only; conflicts swap in the stored record read-only.

import { ApiClient, ConflictError, NextItemResponse } from "./api.js";

export type Phase =
  | "loading"
  | "ranking"
  | "submitting"
  | "conflict"
  | "done"
  | "error";

export interface CandidateView {
  slot: number;
  imageRef: string;
}

export interface ItemView {
  itemId: string;
  imageRef: string;
  instruction: string;
  position: number;
  total: number;
  k: number;
  candidates: CandidateView[];
}

export interface ViewState {
  phase: Phase;
  item: ItemView | null;
  ranks: (number | null)[];
  completed: number;
  message: string;
  storedRanks: Record<string, number> | null;
}

export function canSubmit(state: ViewState): boolean {
  return (
    state.phase === "ranking" &&
    state.item !== null &&
    state.ranks.length === state.item.k &&
    state.ranks.every((r) => r !== null)
  );
}

function itemFromResponse(resp: NextItemResponse): ItemView {
  return {
    itemId: resp.item_id ?? "",
    imageRef: resp.image_ref ?? "",
    instruction: resp.instruction ?? "",
    position: resp.position ?? 0,
    total: resp.total ?? 0,
    k: resp.k ?? (resp.candidates?.length ?? 0),
    candidates: (resp.candidates ?? []).map((c) => ({
      slot: c.slot,
      imageRef: c.image_ref,
    })),
  };
}

export type Listener = (state: ViewState) => void;

export class StudySession {
  private state: ViewState = {
    phase: "loading",
    item: null,
    ranks: [],
    completed: 0,
    message: "",
    storedRanks: null,
  };
  private listeners: Listener[] = [];

  constructor(
    private readonly client: ApiClient,
    readonly sessionId: string,
    readonly rater: string,
  ) {}

  getState(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  async loadNext(): Promise<void> {
    this.update({ phase: "loading", message: "", storedRanks: null });
    let resp: NextItemResponse;
    try {
      resp = await this.client.nextItem(this.sessionId, this.rater);
    } catch (err) {
      this.update({ phase: "error", message: String(err) });
      return;
    }
    if (resp.done) {
      this.update({ phase: "done", item: null, ranks: [] });
      return;
    }
    const item = itemFromResponse(resp);
    this.update({
      phase: "ranking",
      item,
      ranks: new Array<number | null>(item.k).fill(null),
      completed: item.position,
    });
  }

  // Ranks are 1..K; anything else is refused by the input layer and here.
  assignRank(slot: number, rank: number): boolean {
    const { item, phase } = this.state;
    if (phase !== "ranking" || item === null) return false;
    if (!Number.isInteger(rank) || rank < 1 || rank > item.k) return false;
    if (slot < 0 || slot >= item.k) return false;
    const ranks = [...this.state.ranks];
    ranks[slot] = rank; // reassignment replaces, duplicates mean ties
    this.update({ ranks });
    return true;
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state)) return;
    const item = this.state.item!;
    const slotRanks: Record<number, number> = {};
    this.state.ranks.forEach((rank, slot) => {
      slotRanks[slot] = rank!;
    });
    this.update({ phase: "submitting" });
    try {
      await this.client.submitRanks(this.sessionId, this.rater, item.itemId, slotRanks);
    } catch (err) {
      if (err instanceof ConflictError) {
        // keep the server's record on screen, read-only, then move on
        const stored: Record<string, number> = {};
        for (const [slot, rank] of Object.entries(err.storedSlotRanks ?? {})) {
          stored[slot] = rank;
        }
        this.update({ phase: "conflict", message: err.message, storedRanks: stored });
        return;
      }
      // network failure: ranks stay local, the user can retry
      this.update({ phase: "ranking", message: `submit failed, retry: ${String(err)}` });
      return;
    }
    await this.loadNext();
  }

  async acknowledgeConflict(): Promise<void> {
    if (this.state.phase !== "conflict") return;
    await this.loadNext();
  }
}
