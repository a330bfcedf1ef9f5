/** Bootstrap: register or pick a dataset, open a session, mount the view. */

import { openSession } from "./client.js";
import { TreeView } from "./view.js";

const DEFAULT_BASE = "http://127.0.0.1:8000";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? DEFAULT_BASE;
  const container = document.getElementById("app");
  if (!container) throw new Error("missing #app container");

  const datasets = (await (await fetch(`${baseUrl}/datasets`)).json()) as Array<{
    id: string;
  }>;
  const datasetId = params.get("dataset") ?? datasets[0]?.id;
  if (!datasetId) {
    container.textContent =
      "No datasets registered. POST /datasets on the service first.";
    return;
  }

  const config = {
    k: Number(params.get("k") ?? 4),
    m_w: params.get("mw") ?? "auto",
    weight: { kind: params.get("weight") ?? "size", favored: {}, ignored: [] },
  };
  const { client, doc } = await openSession(baseUrl, datasetId, config);
  new TreeView(container, client, doc);
}

boot().catch((err) => {
  const container = document.getElementById("app");
  if (container) {
    container.textContent = `failed to start: ${err}`;
  }
});
