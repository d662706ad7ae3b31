/** Thin typed client over the scenegen service REST API. */

import type {
  CandidateDoc,
  CooccurrenceDoc,
  HealthDoc,
  LayoutDoc,
  ScenePayload,
  SceneSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

/** The user-facing line for an error; conflicts get the reload prompt. */
export function uiMessageFor(err: unknown): string {
  if (err instanceof ApiError && err.isConflict) {
    return "scene changed, reload";
  }
  if (err instanceof ApiError) return err.message;
  return String(err);
}

export function pathToString(path: number[]): string {
  return path.length === 0 ? "-" : path.join("-");
}

export function pathFromString(raw: string): number[] {
  if (raw === "" || raw === "-") return [];
  return raw.split("-").map((p) => Number.parseInt(p, 10));
}

async function unwrap<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body: keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private get(path: string): Promise<Response> {
    return this.fetchFn(this.baseUrl + path);
  }

  private post(path: string, body: unknown): Promise<Response> {
    return this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<HealthDoc> {
    return unwrap(await this.get("/api/health"));
  }

  async listScenes(): Promise<SceneSummary[]> {
    const doc = await unwrap<{ scenes: SceneSummary[] }>(
      await this.get("/api/scenes"),
    );
    return doc.scenes;
  }

  async getScene(id: string): Promise<ScenePayload> {
    return unwrap(await this.get(`/api/scenes/${id}`));
  }

  renderUrl(id: string): string {
    return `${this.baseUrl}/api/scenes/${id}/render.svg`;
  }

  async generate(count: number, seed?: number): Promise<ScenePayload[]> {
    const doc = await unwrap<{ scenes: ScenePayload[] }>(
      await this.post("/api/generate", { count, seed }),
    );
    return doc.scenes;
  }

  async layoutToScenes(
    layout: LayoutDoc,
    nSamples: number,
    mode: "mean" | "sample" = "sample",
    seed = 0,
  ): Promise<ScenePayload[]> {
    const doc = await unwrap<{ scenes: ScenePayload[] }>(
      await this.post("/api/layout2scene", {
        layout,
        n_samples: nSamples,
        mode,
        seed,
      }),
    );
    return doc.scenes;
  }

  async candidates(
    sceneId: string,
    path: number[],
    k = 5,
  ): Promise<CandidateDoc[]> {
    const doc = await unwrap<{ candidates: CandidateDoc[] }>(
      await this.get(
        `/api/scenes/${sceneId}/subtree/${pathToString(path)}/candidates?k=${k}`,
      ),
    );
    return doc.candidates;
  }

  async replaceSubtree(
    sceneId: string,
    path: number[],
    revision: number,
    donorSceneId: string,
    donorPath: string,
  ): Promise<ScenePayload> {
    return unwrap(
      await this.post(
        `/api/scenes/${sceneId}/subtree/${pathToString(path)}/replace`,
        { revision, donor_scene_id: donorSceneId, donor_path: donorPath },
      ),
    );
  }

  async deleteSubtree(
    sceneId: string,
    path: number[],
    revision: number,
  ): Promise<ScenePayload> {
    return unwrap(
      await this.post(
        `/api/scenes/${sceneId}/subtree/${pathToString(path)}/delete`,
        { revision },
      ),
    );
  }

  async moveSubtree(
    sceneId: string,
    path: number[],
    revision: number,
    relpos: number[],
  ): Promise<ScenePayload> {
    return unwrap(
      await this.post(
        `/api/scenes/${sceneId}/subtree/${pathToString(path)}/move`,
        { revision, relpos },
      ),
    );
  }

  async cooccurrence(): Promise<CooccurrenceDoc> {
    return unwrap(await this.get("/api/metrics/cooccurrence"));
  }
}
