import { describe, expect, it } from "vitest";

import { ApiClient, ConflictError, NextItemResponse, RanksAck } from "../src/api.js";
import { StudySession, canSubmit } from "../src/state.js";

function itemResponse(id: string, position: number, total: number): NextItemResponse {
  return {
    done: false,
    item_id: id,
    image_ref: `${id}.png`,
    instruction: `rank ${id}`,
    position,
    total,
    k: 4,
    candidates: [0, 1, 2, 3].map((slot) => ({
      slot,
      image_ref: `${id}_c${slot}.png`,
    })),
  };
}

interface Submission {
  itemId: string;
  slotRanks: Record<number, number>;
}

class FakeClient extends ApiClient {
  submissions: Submission[] = [];
  failNextSubmit = false;
  conflictNextSubmit = false;
  private cursor = 0;

  constructor(private readonly items: NextItemResponse[]) {
    super("http://fake");
  }

  override async nextItem(): Promise<NextItemResponse> {
    if (this.cursor >= this.items.length) return { done: true };
    return this.items[this.cursor]!;
  }

  override async submitRanks(
    _session: string,
    _rater: string,
    itemId: string,
    slotRanks: Record<number, number>,
  ): Promise<RanksAck> {
    if (this.failNextSubmit) {
      this.failNextSubmit = false;
      throw new TypeError("fetch failed");
    }
    if (this.conflictNextSubmit) {
      this.conflictNextSubmit = false;
      this.cursor += 1; // the server already holds a record for this item
      throw new ConflictError("already ranked", { "0": 1, "1": 2, "2": 3, "3": 4 });
    }
    this.submissions.push({ itemId, slotRanks });
    this.cursor += 1;
    return { status: "accepted", item_id: itemId };
  }
}

function fresh(items: NextItemResponse[]): [StudySession, FakeClient] {
  const client = new FakeClient(items);
  return [new StudySession(client, "study", "rater"), client];
}

describe("StudySession", () => {
  it("starts on the first pending item with no ranks set", async () => {
    const [session] = fresh([itemResponse("i0", 0, 3)]);
    await session.loadNext();
    const state = session.getState();
    expect(state.phase).toBe("ranking");
    expect(state.item?.itemId).toBe("i0");
    expect(state.ranks).toEqual([null, null, null, null]);
    expect(canSubmit(state)).toBe(false);
  });

  it("shows the done screen once the server reports exhaustion", async () => {
    const [session] = fresh([]);
    await session.loadNext();
    expect(session.getState().phase).toBe("done");
  });

  it("keeps the same pending item across reloads (server is source of truth)", async () => {
    const [session] = fresh([itemResponse("i1", 1, 3)]);
    await session.loadNext();
    session.assignRank(0, 1);
    await session.loadNext(); // simulated reload: local ranks reset, same item
    const state = session.getState();
    expect(state.item?.itemId).toBe("i1");
    expect(state.ranks).toEqual([null, null, null, null]);
  });

  it("allows ties and replaces reassigned ranks", async () => {
    const [session] = fresh([itemResponse("i0", 0, 1)]);
    await session.loadNext();
    expect(session.assignRank(0, 1)).toBe(true);
    expect(session.assignRank(1, 1)).toBe(true); // tie
    expect(session.getState().ranks.slice(0, 2)).toEqual([1, 1]);
    expect(session.assignRank(0, 3)).toBe(true); // replace
    expect(session.getState().ranks[0]).toBe(3);
  });

  it("rejects out-of-range ranks", async () => {
    const [session] = fresh([itemResponse("i0", 0, 1)]);
    await session.loadNext();
    expect(session.assignRank(0, 0)).toBe(false);
    expect(session.assignRank(0, 5)).toBe(false);
    expect(session.assignRank(0, 1.5)).toBe(false);
    expect(session.getState().ranks[0]).toBeNull();
  });

  it("blocks submit until every candidate is ranked", async () => {
    const [session, client] = fresh([itemResponse("i0", 0, 1)]);
    await session.loadNext();
    for (const slot of [0, 1, 2]) session.assignRank(slot, slot + 1);
    expect(canSubmit(session.getState())).toBe(false);
    await session.submit(); // must be a no-op
    expect(client.submissions).toHaveLength(0);
    session.assignRank(3, 4);
    expect(canSubmit(session.getState())).toBe(true);
    await session.submit();
    expect(client.submissions).toHaveLength(1);
    expect(client.submissions[0]!.slotRanks).toEqual({ 0: 1, 1: 2, 2: 3, 3: 4 });
  });

  it("advances only after a server ack", async () => {
    const [session, client] = fresh([
      itemResponse("i0", 0, 2),
      itemResponse("i1", 1, 2),
    ]);
    await session.loadNext();
    [1, 2, 3, 4].forEach((rank, slot) => session.assignRank(slot, rank));
    await session.submit();
    expect(client.submissions.map((s) => s.itemId)).toEqual(["i0"]);
    expect(session.getState().item?.itemId).toBe("i1");
  });

  it("keeps local ranks and offers retry after a network failure", async () => {
    const [session, client] = fresh([itemResponse("i0", 0, 1)]);
    await session.loadNext();
    [1, 1, 3, 4].forEach((rank, slot) => session.assignRank(slot, rank));
    client.failNextSubmit = true;
    await session.submit();
    const state = session.getState();
    expect(state.phase).toBe("ranking");
    expect(state.message).toContain("retry");
    expect(state.ranks).toEqual([1, 1, 3, 4]); // nothing lost
    await session.submit(); // retry succeeds
    expect(client.submissions).toHaveLength(1);
    expect(session.getState().phase).toBe("done");
  });

  it("shows the stored record read-only on conflict", async () => {
    const [session, client] = fresh([itemResponse("i0", 0, 1)]);
    await session.loadNext();
    [4, 3, 2, 1].forEach((rank, slot) => session.assignRank(slot, rank));
    client.conflictNextSubmit = true;
    await session.submit();
    const state = session.getState();
    expect(state.phase).toBe("conflict");
    expect(state.storedRanks).toEqual({ "0": 1, "1": 2, "2": 3, "3": 4 });
    expect(session.assignRank(0, 2)).toBe(false); // read-only
    await session.acknowledgeConflict();
    expect(session.getState().phase).toBe("done");
  });
});
