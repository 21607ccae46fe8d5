// Typed client for the ranking-service HTTP API.

export interface DisplayCandidate {
  slot: number;
  image_ref: string;
}

export interface NextItemResponse {
  done: boolean;
  item_id?: string | null;
  image_ref?: string | null;
  instruction?: string | null;
  position?: number | null;
  total?: number | null;
  k?: number | null;
  candidates?: DisplayCandidate[];
}

export interface RanksAck {
  status: string;
  item_id: string;
}

export interface ResultsResponse {
  means: Record<string, number>;
  records: number;
  tag?: string | null;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(
    message: string,
    readonly storedSlotRanks: Record<string, number> | null,
  ) {
    super(message, 409);
  }
}

function detailMessage(detail: unknown): string {
  if (typeof detail === "string") return detail;
  if (detail && typeof detail === "object" && "message" in detail) {
    return String((detail as { message: unknown }).message);
  }
  return JSON.stringify(detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await resp.json().catch(() => ({}))) as { detail?: unknown };
    if (resp.status === 409) {
      const detail = payload.detail as
        | { stored_slot_ranks?: Record<string, number> }
        | string
        | undefined;
      const stored =
        detail && typeof detail === "object" ? (detail.stored_slot_ranks ?? null) : null;
      throw new ConflictError(detailMessage(detail), stored);
    }
    if (!resp.ok) {
      throw new ApiError(detailMessage(payload.detail ?? resp.statusText), resp.status);
    }
    return payload as T;
  }

  nextItem(sessionId: string, rater: string): Promise<NextItemResponse> {
    const query = new URLSearchParams({ rater });
    return this.request("GET", `/sessions/${sessionId}/next?${query}`);
  }

  submitRanks(
    sessionId: string,
    rater: string,
    itemId: string,
    slotRanks: Record<number, number>,
  ): Promise<RanksAck> {
    return this.request("POST", `/sessions/${sessionId}/ranks`, {
      rater_id: rater,
      item_id: itemId,
      slot_ranks: slotRanks,
    });
  }

  results(sessionId: string, tag?: string): Promise<ResultsResponse> {
    const query = tag ? `?${new URLSearchParams({ tag })}` : "";
    return this.request("GET", `/sessions/${sessionId}/results${query}`);
  }
}
