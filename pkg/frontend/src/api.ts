/** Thin client for the predict server with monotonically increasing request
 * sequence numbers.  fetch is injectable for tests. */

import type { PredictRequest, PredictResponse, SceneOutline, HealthResponse } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class PredictClient {
  private seq = 0;

  constructor(private baseUrl: string, private fetchFn: FetchLike = fetch) {}

  nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  async health(): Promise<HealthResponse> {
    const r = await this.fetchFn(`${this.baseUrl}/health`);
    if (!r.ok) throw new Error(`health failed: ${r.status}`);
    return r.json();
  }

  async scene(): Promise<SceneOutline> {
    const r = await this.fetchFn(`${this.baseUrl}/scene`);
    if (!r.ok) throw new Error(`scene failed: ${r.status}`);
    return r.json();
  }

  /** Issues a prediction; the caller pairs the returned seq with the
   * response to discard stale arrivals. */
  predict(req: PredictRequest): { seq: number; response: Promise<PredictResponse> } {
    const seq = this.nextSeq();
    const response = this.fetchFn(`${this.baseUrl}/predict`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(req),
    }).then(async (r) => {
      if (!r.ok) {
        let detail = `${r.status}`;
        try {
          const body = await r.json();
          if (body && body.error) detail = `${r.status}: ${body.error}`;
        } catch {
          /* non-JSON error body */
        }
        throw new Error(`predict failed (${detail})`);
      }
      return r.json();
    });
    return { seq, response };
  }
}
