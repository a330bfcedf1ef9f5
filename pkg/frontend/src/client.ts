/** JSON API client for the drilldown service. */

export interface TreeNode {
  rule: string;
  count: number;
  exact: boolean;
  weight: number;
  children: TreeNode[];
}

export interface SessionDoc {
  columns: string[];
  aggregate: string;
  tree: TreeNode;
}

export interface WeightSpec {
  kind: string;
  favored: Record<string, number>;
  ignored: string[];
}

export interface ConfigUpdate {
  k?: number;
  weight?: WeightSpec;
  m_w?: number | "auto";
}

/** The mutation surface the view needs; tests inject a mock. */
export interface DrillClient {
  expand(path: string): Promise<SessionDoc>;
  star(path: string, column: string): Promise<SessionDoc>;
  collapse(path: string): Promise<SessionDoc>;
  putConfig(update: ConfigUpdate): Promise<SessionDoc>;
}

export class HttpDrillClient implements DrillClient {
  constructor(
    private baseUrl: string,
    private sessionId: string,
  ) {}

  private async post(path: string, body: unknown): Promise<SessionDoc> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      const err = await response.json().catch(() => ({ message: response.statusText }));
      throw new Error(err.message ?? `HTTP ${response.status}`);
    }
    return (await response.json()) as SessionDoc;
  }

  expand(path: string): Promise<SessionDoc> {
    return this.post(`/sessions/${this.sessionId}/expand`, { path });
  }

  star(path: string, column: string): Promise<SessionDoc> {
    return this.post(`/sessions/${this.sessionId}/star`, { path, column });
  }

  collapse(path: string): Promise<SessionDoc> {
    return this.post(`/sessions/${this.sessionId}/collapse`, { path });
  }

  async putConfig(update: ConfigUpdate): Promise<SessionDoc> {
    const response = await fetch(`${this.baseUrl}/sessions/${this.sessionId}/config`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(update),
    });
    if (!response.ok) {
      const err = await response.json().catch(() => ({ message: response.statusText }));
      throw new Error(err.message ?? `HTTP ${response.status}`);
    }
    return (await response.json()) as SessionDoc;
  }
}

export async function openSession(
  baseUrl: string,
  datasetId: string,
  config: Record<string, unknown>,
): Promise<{ client: HttpDrillClient; doc: SessionDoc }> {
  const response = await fetch(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ dataset_id: datasetId, config }),
  });
  if (!response.ok) {
    throw new Error(`session create failed: HTTP ${response.status}`);
  }
  const body = (await response.json()) as { session_id: string; tree: SessionDoc };
  return { client: new HttpDrillClient(baseUrl, body.session_id), doc: body.tree };
}
