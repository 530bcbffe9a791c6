// Pure DOM builders for the debugger panes.  Every rendered value string is
// the server's canonical text; the UI never re-formats values.

import type {
  DiffReport,
  InstanceValue,
  PendingQuery,
  Report,
  RuleRef,
  SessionState,
  TreeNode,
} from "./api.js";

export interface Handlers {
  onAnswer(answer: "correct" | "wrong" | "skip" | "abort"): void;
  onMarkWrong(instance: string): void;
  onSelectValue(instance: string): void;
}

function el(
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function valueText(v: InstanceValue): string {
  return v.value === null ? "undefined" : v.value.text;
}

// ---------------------------------------------------------------------------
// Grammar pane: plain source with report rules highlighted by line/column.

export function renderGrammar(
  source: string,
  highlights: RuleRef[],
): HTMLElement {
  const pane = el("pre", "grammar-pane");
  const lines = source.split("\n");
  const byLine = new Map<number, RuleRef[]>();
  for (const rule of highlights) {
    const list = byLine.get(rule.span.line) ?? [];
    list.push(rule);
    byLine.set(rule.span.line, list);
  }
  lines.forEach((line, i) => {
    const ln = i + 1;
    const rules = byLine.get(ln);
    const row = el("div", rules ? "grammar-line buggy-rule" : "grammar-line");
    row.dataset.line = String(ln);
    if (rules) {
      const before = line.slice(0, rules[0].span.col - 1);
      const span = line.slice(rules[0].span.col - 1);
      row.append(
        document.createTextNode(before),
        el("mark", "rule-highlight", span),
      );
      row.title = rules.map((r) => r.id).join(", ");
    } else {
      row.textContent = line;
    }
    pane.appendChild(row);
  });
  return pane;
}

// ---------------------------------------------------------------------------
// Tree pane: collapsible attributed tree; judged-correct subtrees start
// collapsed; clicking a value selects it for diffing / marking wrong.

export function renderTree(
  node: TreeNode,
  opts: {
    collapsed?: Set<number>;
    onSelectValue?: (instance: string) => void;
  } = {},
): HTMLElement {
  const box = el("div", "tree-node");
  box.dataset.nodeId = String(node.id);
  if (node.terminal) {
    box.append(el("span", "terminal", JSON.stringify(node.symbol)));
    return box;
  }
  const head = el("div", "tree-head");
  const isCollapsed = opts.collapsed?.has(node.id) ?? false;
  const kids = node.children ?? [];
  const toggle = el(
    "span",
    "tree-toggle",
    kids.length ? (isCollapsed ? "▸" : "▾") : "·",
  );
  head.append(toggle, el("span", "symbol", node.symbol));
  for (const item of [...(node.inherited ?? []), ...(node.synthesized ?? [])]) {
    const chip = el("span", "value-chip", `${item.attr} = ${valueText(item)}`);
    chip.dataset.instance = item.instance;
    chip.addEventListener("click", (ev) => {
      ev.stopPropagation();
      opts.onSelectValue?.(item.instance);
    });
    head.append(chip);
  }
  box.append(head);
  const childBox = el("div", "tree-children");
  if (isCollapsed) {
    childBox.classList.add("hidden");
    head.classList.add("judged-correct");
  }
  for (const child of kids) {
    childBox.append(renderTree(child, opts));
  }
  if (kids.length) {
    toggle.addEventListener("click", () => {
      childBox.classList.toggle("hidden");
      toggle.textContent = childBox.classList.contains("hidden") ? "▸" : "▾";
    });
    box.append(childBox);
  }
  return box;
}

// Pruned subtrees arrive as stubs; render them collapsed with their
// synthesized boundary values, the incomplete-subtree presentation.
export function renderQueryTree(node: TreeNode): HTMLElement {
  const box = el("div", "tree-node");
  box.dataset.nodeId = String(node.id);
  if (node.terminal) {
    box.append(el("span", "terminal", JSON.stringify(node.symbol)));
    return box;
  }
  if (node.stub) {
    const stub = el("div", "pruned-stub");
    const values = (node.synthesized ?? [])
      .map((s) => `${s.attr} = ${valueText(s)}`)
      .join(", ");
    stub.textContent = `${node.symbol} ⟨pruned: ${values}⟩`;
    box.append(stub);
    return box;
  }
  const head = el("div", "tree-head");
  head.append(el("span", "symbol", node.symbol));
  for (const item of [...(node.inherited ?? []), ...(node.synthesized ?? [])]) {
    head.append(el("span", "value-chip", `${item.attr} = ${valueText(item)}`));
  }
  box.append(head);
  const childBox = el("div", "tree-children");
  for (const child of node.children ?? []) {
    childBox.append(renderQueryTree(child));
  }
  box.append(childBox);
  return box;
}

// ---------------------------------------------------------------------------
// Query dialog: premise/conclusion with per-value "mark wrong", and
// Correct / Wrong / Skip (plus Abort) buttons.

export function renderQuery(q: PendingQuery, handlers: Handlers): HTMLElement {
  const dialog = el("div", "query-dialog");
  const title = q.symptom_check
    ? "Is the evaluation result correct?"
    : {
        synth: "Is this relation correct?",
        region: "Is this relation correct? (pruned parts shown as stubs)",
        slice: "Is this value correct?",
      }[q.form.kind];
  dialog.append(el("h3", "query-title", title));
  dialog.dataset.form = q.form.kind;

  const boundary = (label: string, items: typeof q.premise) => {
    const section = el("div", `boundary ${label.toLowerCase()}`);
    section.append(el("h4", undefined, label));
    const list = el("ul");
    for (const item of items) {
      const row = el("li", "boundary-item");
      row.append(
        el(
          "span",
          "boundary-value",
          `${item.symbol}.${item.attr} @ node ${item.node} = ${valueText(item)}`,
        ),
      );
      const mark = el("button", "mark-wrong", "mark wrong");
      mark.dataset.instance = item.instance;
      mark.addEventListener("click", () => handlers.onMarkWrong(item.instance));
      row.append(mark);
      list.append(row);
    }
    section.append(list);
    return section;
  };
  if (q.premise.length) dialog.append(boundary("Premise", q.premise));
  dialog.append(boundary("Conclusion", q.conclusion));

  if (q.display_tree) {
    const treeBox = el("div", "query-tree");
    treeBox.append(renderQueryTree(q.display_tree));
    dialog.append(treeBox);
  }

  const buttons = el("div", "answer-buttons");
  for (const kind of ["correct", "wrong", "skip", "abort"] as const) {
    const b = el("button", `answer-${kind}`, kind);
    b.addEventListener("click", () => handlers.onAnswer(kind));
    buttons.append(b);
  }
  dialog.append(buttons);
  return dialog;
}

// ---------------------------------------------------------------------------
// Report pane and diff viewer.

export function renderReport(report: Report): HTMLElement {
  const pane = el("div", "report-pane");
  if (report.rules.length === 0) {
    pane.append(el("p", "no-bug", "No bug: the root relation was judged correct."));
    return pane;
  }
  pane.append(
    el(
      "h3",
      undefined,
      `${report.rules.length} candidate rule(s) after ` +
        `${report.queries_asked} queries (${report.terminated_by})`,
    ),
  );
  const list = el("ul", "candidate-rules");
  for (const rule of report.rules) {
    list.append(
      el("li", "candidate-rule", `${rule.id}  [line ${rule.span.line}]`),
    );
  }
  pane.append(list);
  return pane;
}

export function renderDiff(diff: DiffReport): HTMLElement {
  const pane = el("div", "diff-pane");
  const side = (label: string, v: { instance: string; value: { text: string } | null }) => {
    const s = el("div", "diff-side");
    s.append(el("h4", undefined, `${label}: ${v.instance}`));
    s.append(el("pre", undefined, v.value?.text ?? "undefined"));
    return s;
  };
  const sides = el("div", "diff-sides");
  sides.append(side("a", diff.a), side("b", diff.b));
  pane.append(sides);
  if (diff.equal) {
    pane.append(el("p", "diff-equal", "no differences"));
    return pane;
  }
  const list = el("ul", "diff-edits");
  for (const e of diff.edits) {
    const text =
      e.kind === "added"
        ? `${e.path || "(root)"}: added ${e.b}`
        : e.kind === "removed"
          ? `${e.path || "(root)"}: removed ${e.a}`
          : `${e.path || "(root)"}: ${e.a} → ${e.b}`;
    list.append(el("li", `diff-${e.kind}`, text));
  }
  pane.append(list);
  return pane;
}

// Subtrees already judged correct start collapsed in the tree pane.
export function collapsedNodes(state: SessionState): Set<number> {
  return new Set(state.correct_subtrees ?? []);
}
