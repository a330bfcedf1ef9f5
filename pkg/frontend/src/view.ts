/** Rule-table rendering and gesture handling.
 *
 * The view is a pure function of the last server payload plus a pending
 * flag: every mutation response re-renders the whole tree (payloads are a
 * few dozen rules at most), so the client never does count arithmetic.
 */

import type { ConfigUpdate, DrillClient, SessionDoc, TreeNode } from "./client.js";

export interface Row {
  node: TreeNode;
  depth: number;
}

/** Depth-first flattening; row order mirrors the displayed tree. */
export function flattenTree(root: TreeNode): Row[] {
  const rows: Row[] = [];
  const walk = (node: TreeNode, depth: number) => {
    rows.push({ node, depth });
    for (const child of node.children) walk(child, depth + 1);
  };
  walk(root, 0);
  return rows;
}

/** Minimal CSV-line split matching the service's rule text form. */
export function splitRule(rule: string): string[] {
  const cells: string[] = [];
  let current = "";
  let quoted = false;
  for (let i = 0; i < rule.length; i++) {
    const ch = rule[i];
    if (quoted) {
      if (ch === '"' && rule[i + 1] === '"') {
        current += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      cells.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  cells.push(current);
  return cells;
}

const fmt = new Intl.NumberFormat("en-US", { maximumFractionDigits: 0 });

export class TreeView {
  private doc: SessionDoc;
  private pending = false;
  readonly columnModes = new Map<string, "normal" | "favored" | "ignored">();

  constructor(
    private container: HTMLElement,
    private client: DrillClient,
    doc: SessionDoc,
  ) {
    this.doc = doc;
    this.render();
  }

  get isPending(): boolean {
    return this.pending;
  }

  get document(): SessionDoc {
    return this.doc;
  }

  render(): void {
    this.container.textContent = "";
    const table = document.createElement("table");
    table.className = "rule-table";
    table.appendChild(this.header());
    const body = document.createElement("tbody");
    for (const row of flattenTree(this.doc.tree)) {
      body.appendChild(this.ruleRow(row));
    }
    table.appendChild(body);
    this.container.appendChild(table);
  }

  private header(): HTMLTableSectionElement {
    const head = document.createElement("thead");
    const tr = document.createElement("tr");
    for (const column of this.doc.columns) {
      const th = document.createElement("th");
      const label = document.createElement("span");
      label.textContent = column;
      th.appendChild(label);
      const toggle = document.createElement("button");
      toggle.className = "mode-toggle";
      toggle.dataset.column = column;
      toggle.textContent = this.modeGlyph(column);
      toggle.title = "cycle normal / favored / ignored";
      toggle.addEventListener("click", () => this.cycleMode(column));
      th.appendChild(toggle);
      tr.appendChild(th);
    }
    for (const extra of [this.doc.aggregate === "count" ? "Count" : "Sum", "Weight"]) {
      const th = document.createElement("th");
      th.textContent = extra;
      tr.appendChild(th);
    }
    head.appendChild(tr);
    return head;
  }

  private modeGlyph(column: string): string {
    const mode = this.columnModes.get(column) ?? "normal";
    return mode === "favored" ? "+" : mode === "ignored" ? "-" : "=";
  }

  private ruleRow(row: Row): HTMLTableRowElement {
    const tr = document.createElement("tr");
    tr.className = "rule-row";
    tr.dataset.rule = row.node.rule;
    tr.dataset.depth = String(row.depth);
    if (this.pending) tr.classList.add("pending");
    const cells = splitRule(row.node.rule);
    cells.forEach((cell, i) => {
      const td = document.createElement("td");
      const marker = i === 0 && row.depth > 0 ? "▶".repeat(row.depth) + " " : "";
      td.textContent = marker + cell;
      if (cell === "*") {
        td.classList.add("star-cell");
        td.dataset.column = this.doc.columns[i];
        td.addEventListener("click", (ev) => {
          ev.stopPropagation();
          void this.onStar(row.node, this.doc.columns[i]);
        });
      }
      tr.appendChild(td);
    });
    const count = document.createElement("td");
    count.className = row.node.exact ? "count exact" : "count estimate";
    count.textContent = (row.node.exact ? "" : "≈") + fmt.format(row.node.count);
    tr.appendChild(count);
    const weight = document.createElement("td");
    weight.className = "weight";
    weight.textContent = String(row.node.weight);
    tr.appendChild(weight);
    tr.addEventListener("click", () => void this.onRuleClick(row.node));
    return tr;
  }

  private async mutate(action: () => Promise<SessionDoc>): Promise<void> {
    if (this.pending) return; // single in-flight mutation
    this.pending = true;
    this.container.classList.add("busy");
    let failure: string | null = null;
    try {
      this.doc = await action();
    } catch (err) {
      failure = err instanceof Error ? err.message : String(err);
    }
    this.pending = false;
    this.container.classList.remove("busy");
    this.render();
    if (failure !== null) this.toast(failure);
  }

  /** Click on a rule: expand when unexpanded, collapse otherwise. */
  onRuleClick(node: TreeNode): Promise<void> {
    if (node.children.length > 0) {
      return this.mutate(() => this.client.collapse(node.rule));
    }
    return this.mutate(() => this.client.expand(node.rule));
  }

  onStar(node: TreeNode, column: string): Promise<void> {
    return this.mutate(() => this.client.star(node.rule, column));
  }

  private cycleMode(column: string): void {
    const order: Array<"normal" | "favored" | "ignored"> = [
      "normal",
      "favored",
      "ignored",
    ];
    const current = this.columnModes.get(column) ?? "normal";
    const next = order[(order.indexOf(current) + 1) % order.length];
    this.columnModes.set(column, next);
    void this.mutate(() => this.client.putConfig(this.configUpdate()));
  }

  configUpdate(): ConfigUpdate {
    const favored: Record<string, number> = {};
    const ignored: string[] = [];
    for (const [column, mode] of this.columnModes) {
      if (mode === "favored") favored[column] = 2.0;
      else if (mode === "ignored") ignored.push(column);
    }
    return { weight: { kind: "size", favored, ignored } };
  }

  private toast(message: string): void {
    const note = document.createElement("div");
    note.className = "toast";
    note.textContent = message;
    this.container.appendChild(note);
    setTimeout(() => note.remove(), 4000);
  }
}
