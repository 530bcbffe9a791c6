// Application shell: one session, one in-flight request, no client-side
// debugging logic.  A full page reload rebuilds the identical view from
// GET /sessions/{id}.

import { ApiError, Client, SessionState } from "./api.js";
import {
  collapsedNodes,
  renderDiff,
  renderGrammar,
  renderQuery,
  renderReport,
  renderTree,
} from "./render.js";

export interface Panes {
  grammar: HTMLElement;
  tree: HTMLElement;
  dialog: HTMLElement;
  report: HTMLElement;
  diff: HTMLElement;
  status: HTMLElement;
}

export class App {
  state: SessionState | null = null;
  private busy = false;
  private diffSelection: string[] = [];

  constructor(
    private client: Client,
    private panes: Panes,
  ) {}

  async start(body: {
    grammar: string;
    input: string;
    strategy?: string;
    epsilon?: number;
  }): Promise<void> {
    this.state = await this.client.createSession(body);
    this.render();
  }

  async resume(id: string): Promise<void> {
    this.state = await this.client.getSession(id);
    this.render();
  }

  private async act(fn: () => Promise<SessionState>): Promise<void> {
    if (this.busy || !this.state) return;
    this.busy = true;
    try {
      this.state = await fn();
      this.render();
    } catch (err) {
      this.showError(err);
    } finally {
      this.busy = false;
    }
  }

  answer(kind: "correct" | "wrong" | "skip" | "abort"): Promise<void> {
    const s = this.state;
    if (!s?.pending_query) return Promise.resolve();
    return this.act(() =>
      this.client.answer(s.id, kind, s.pending_query!.fingerprint),
    );
  }

  markWrong(instance: string): Promise<void> {
    const s = this.state;
    if (!s) return Promise.resolve();
    return this.act(() => this.client.volunteer(s.id, instance));
  }

  async selectValue(instance: string): Promise<void> {
    this.diffSelection.push(instance);
    if (this.diffSelection.length < 2) {
      this.panes.status.textContent = `diff: selected ${instance}, pick another value`;
      return;
    }
    const [a, b] = this.diffSelection.splice(0, 2);
    try {
      const diff = await this.client.diff(this.state!.id, a, b);
      this.panes.diff.replaceChildren(renderDiff(diff));
      this.panes.status.textContent = "";
    } catch (err) {
      this.showError(err);
    }
  }

  render(): void {
    const s = this.state;
    if (!s) return;
    this.panes.grammar.replaceChildren(
      renderGrammar(s.grammar.source, s.report?.rules ?? []),
    );
    this.panes.tree.replaceChildren(
      renderTree(s.tree, {
        collapsed: collapsedNodes(s),
        onSelectValue: (inst) => void this.selectValue(inst),
      }),
    );
    if (s.pending_query) {
      this.panes.dialog.replaceChildren(
        renderQuery(s.pending_query, {
          onAnswer: (kind) => void this.answer(kind),
          onMarkWrong: (inst) => void this.markWrong(inst),
          onSelectValue: (inst) => void this.selectValue(inst),
        }),
      );
    } else {
      this.panes.dialog.replaceChildren();
    }
    this.panes.report.replaceChildren(
      s.report ? renderReport(s.report) : document.createTextNode(""),
    );
    const fault = s.evaluation.fault;
    this.panes.status.textContent =
      s.status === "done"
        ? `session finished after ${s.queries_asked} queries`
        : fault
          ? `evaluation failed (${fault.kind} at ${fault.comp}); debugging the failing computation`
          : `${s.queries_asked} queries so far`;
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
    this.panes.status.textContent = `error — ${message}`;
  }
}
