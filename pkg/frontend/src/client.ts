// Thin client over the documented operations-service endpoints.
//
// Every network call goes through request() and is recorded, so tests can
// audit that nothing outside the documented contract is ever touched.

import type {
  ActionDoc,
  RecommendationDoc,
  RequestForm,
  RevisionEvent,
  StateDoc,
  WhatifDoc,
} from "./types.js";

export const DOCUMENTED_ENDPOINTS = [
  "GET /state",
  "POST /requests",
  "POST /recommend",
  "POST /whatif",
  "POST /commit",
  "POST /positions",
  "POST /tick",
  "WS /events",
] as const;

export class OpsError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = typeof fetch;

interface WebSocketLike {
  addEventListener(type: string, listener: (ev: any) => void): void;
  close(): void;
}

type WebSocketCtor = new (url: string) => WebSocketLike;

export class OpsClient {
  readonly calls: string[] = [];
  private fetchImpl: FetchLike;

  constructor(
    private baseUrl: string,
    opts: { fetchImpl?: FetchLike; webSocketCtor?: WebSocketCtor } = {},
  ) {
    this.fetchImpl = opts.fetchImpl ?? fetch;
    this.wsCtor = opts.webSocketCtor ?? (globalThis as any).WebSocket;
  }

  private wsCtor: WebSocketCtor | undefined;

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.calls.push(`${method} ${path}`);
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await res.json();
    if (!res.ok) {
      throw new OpsError(res.status, doc.detail ?? JSON.stringify(doc));
    }
    return doc as T;
  }

  getState(): Promise<StateDoc> {
    return this.request("GET", "/state");
  }

  submitRequest(form: RequestForm): Promise<{ revision: number; request_id: string }> {
    return this.request("POST", "/requests", {
      id: form.id,
      time: form.time,
      location: { lat: form.lat, lon: form.lon },
      precedence: form.precedence,
      patient_count: form.patient_count,
      destination: form.destination,
    });
  }

  recommend(requestId: string, opts: { iterations?: number; seed?: number } = {}):
      Promise<RecommendationDoc> {
    return this.request("POST", "/recommend", { request_id: requestId, ...opts });
  }

  whatif(requestId: string, forcedAxp?: string | null, forcedAircraft?: string | null):
      Promise<WhatifDoc> {
    return this.request("POST", "/whatif", {
      request_id: requestId,
      forced_axp: forcedAxp ?? null,
      forced_aircraft: forcedAircraft ?? null,
    });
  }

  commit(action: ActionDoc): Promise<{ revision: number }> {
    return this.request("POST", "/commit", action);
  }

  ingestPosition(id: string, t: number, lat: number, lon: number): Promise<{ revision: number }> {
    return this.request("POST", "/positions", { id, t, position: { lat, lon } });
  }

  tick(steps = 1): Promise<{ revision: number; advanced: number; clock: number }> {
    return this.request("POST", "/tick", { steps });
  }

  // Revision broadcast stream; the caller owns the returned closer.
  subscribe(onEvent: (ev: RevisionEvent) => void): () => void {
    if (!this.wsCtor) {
      throw new Error("no WebSocket implementation available");
    }
    this.calls.push("WS /events");
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + "/events";
    const ws = new this.wsCtor(wsUrl);
    ws.addEventListener("message", (ev: any) => {
      onEvent(JSON.parse(typeof ev.data === "string" ? ev.data : ev.data.toString()));
    });
    return () => ws.close();
  }
}
