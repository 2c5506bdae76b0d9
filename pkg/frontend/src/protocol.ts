// Replay-service protocol client. Pure transport: every number shown in the
// UI comes from server messages; no refinement math happens here.

export interface StateMessage {
  seq: number;
  t: number;
  s_r: number;
  v: number;
  R: number;
  q: number[];
  p: number[];
  theta: number[];
}

export interface SessionInfo {
  id: string;
  V0r: number;
  Vminr: number;
  duration_s: number;
  eta: number;
}

export interface ToleranceDoc {
  eps_p: number[][];
  eps_theta: number[];
}

export interface RefinementResultDoc {
  tau_r: number[];
  tolerances: ToleranceDoc;
  trace: {
    t: number[];
    C: number[];
    R: number[];
    v: number[];
    s_r: number[];
    V0r: number;
    Vminr: number;
    eta: number;
  };
}

// minimal surface shared by browser WebSocket and the `ws` package
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open" | "message" | "close" | "error",
                   listener: (event: any) => void): void;
}

export interface ClientOptions {
  fetchFn?: typeof fetch;
  wsFactory?: (url: string) => WebSocketLike;
}

export interface StreamHandle {
  sendCommand(C: number): void;
  close(): void;
}

export interface StreamCallbacks {
  onState?: (msg: StateMessage) => void;
  onDone?: () => void;
  onClose?: () => void;
  onOpen?: () => void;
}

const COMMAND_PERIOD_MS = 20; // 50 Hz while the value changes
const HEARTBEAT_MS = 200;

export class ReplayClient {
  private readonly base: string;
  private readonly fetchFn: typeof fetch;
  private readonly wsFactory: (url: string) => WebSocketLike;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.wsFactory = options.wsFactory
      ?? ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
  }

  private async post(path: string, body?: unknown): Promise<any> {
    const res = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    if (!res.ok) {
      throw new Error(`POST ${path} failed: ${res.status} ${await res.text()}`);
    }
    return res.json();
  }

  async createSession(body: Record<string, unknown>): Promise<SessionInfo> {
    return this.post("/sessions", body);
  }

  async start(id: string): Promise<void> {
    await this.post(`/sessions/${id}/start`);
  }

  async stop(id: string): Promise<void> {
    await this.post(`/sessions/${id}/stop`);
  }

  async result(id: string): Promise<RefinementResultDoc> {
    const res = await this.fetchFn(`${this.base}/sessions/${id}/result`);
    if (!res.ok) {
      throw new Error(`result not available: ${res.status}`);
    }
    return res.json();
  }

  /**
   * Connect the state stream and start the command sender: the latest brake
   * value is pushed at 50 Hz while it differs from the last sent value, with
   * a 200 ms heartbeat otherwise. t_client is monotone by construction.
   */
  connectStream(id: string, readCommand: () => number,
                callbacks: StreamCallbacks = {}): StreamHandle {
    const wsUrl = this.base.replace(/^http/, "ws") + `/sessions/${id}/stream`;
    const ws = this.wsFactory(wsUrl);
    let open = false;
    let closed = false;
    let lastSent = Number.NaN;
    let lastSentAt = 0;
    let t0 = Date.now();

    const pushCommand = (value: number) => {
      if (!open || closed) return;
      const C = Math.min(0, Math.max(-1, value));
      const now = Date.now();
      const due = C !== lastSent
        ? now - lastSentAt >= COMMAND_PERIOD_MS
        : now - lastSentAt >= HEARTBEAT_MS;
      if (!due) return;
      lastSent = C;
      lastSentAt = now;
      ws.send(JSON.stringify({ t_client: (now - t0) / 1000, C }));
    };

    const timer = setInterval(() => pushCommand(readCommand()), COMMAND_PERIOD_MS);

    ws.addEventListener("open", () => {
      open = true;
      callbacks.onOpen?.();
    });
    ws.addEventListener("message", (event: any) => {
      const data = typeof event.data === "string" ? event.data : String(event.data);
      const msg = JSON.parse(data);
      if (msg.event === "done") {
        callbacks.onDone?.();
        return;
      }
      callbacks.onState?.(msg as StateMessage);
    });
    ws.addEventListener("close", () => {
      closed = true;
      clearInterval(timer);
      callbacks.onClose?.();
    });
    ws.addEventListener("error", () => { /* close follows */ });

    return {
      sendCommand: pushCommand,
      close: () => {
        closed = true;
        clearInterval(timer);
        ws.close();
      },
    };
  }
}
