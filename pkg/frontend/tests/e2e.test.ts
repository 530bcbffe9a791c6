// @vitest-environment jsdom
//
// Scripted browser session against a live server: boots `agdebug serve`
// on an ephemeral port, then drives a full G1 debugging session through
// the real App/Client/render stack inside jsdom, answering truthfully.

import { spawn, ChildProcess } from "node:child_process";
import { createInterface } from "node:readline";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import { App, Panes } from "../src/app.js";

let server: ChildProcess;
let base: string;

// Truthful answers for g1_buggy on ".101": the root result 3/8 is wrong
// (should be 5/8); the inner L subtree is right; the outer-L region and
// the B.pos chain are wrong; the constants check out.
const TRUTH: Record<string, "correct" | "wrong"> = {
  "synth:0": "wrong",
  "synth:5": "correct",
  "region:2": "wrong",
  "synth:3": "correct",
  "slice:3.pos": "wrong",
  "slice:2.pos": "correct",
};

function queryKey(form: {
  kind: string;
  node?: number;
  root?: number;
  target?: string;
}): string {
  if (form.kind === "synth") return `synth:${form.node}`;
  if (form.kind === "region") return `region:${form.root}`;
  return `slice:${form.target}`;
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "agdebug", "serve", "--port", "0"], {
    stdio: ["ignore", "pipe", "inherit"],
  });
  base = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server didn't start")), 20000);
    createInterface({ input: server.stdout! }).on("line", (line) => {
      const m = line.match(/serving on (http:\/\/[^\s]+)/);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
  });
}, 30000);

afterAll(() => {
  server?.kill();
});

function makePanes(): Panes {
  document.body.innerHTML = `
    <div id="grammar-pane"></div><div id="tree-pane"></div>
    <div id="dialog-pane"></div><div id="report-pane"></div>
    <div id="diff-pane"></div><div id="status-bar"></div>`;
  const get = (id: string) => document.getElementById(id) as HTMLElement;
  return {
    grammar: get("grammar-pane"),
    tree: get("tree-pane"),
    dialog: get("dialog-pane"),
    report: get("report-pane"),
    diff: get("diff-pane"),
    status: get("status-bar"),
  };
}

async function fetchAsset(name: string): Promise<string> {
  const { readFile } = await import("node:fs/promises");
  const { resolve } = await import("node:path");
  return readFile(resolve(process.cwd(), "../src/agdebug/assets", name),
                  "utf-8");
}

describe("G1 session in the browser", () => {
  it("answers truthfully to the B.pos report, rendering the pruned stub",
    async () => {
      const panes = makePanes();
      const app = new App(new Client(base), panes);
      await app.start({
        grammar: await fetchAsset("g1_buggy.ag"),
        input: ".101",
        strategy: "gad",
      });

      let sawRegionStub = false;
      let sawCollapsedCorrect = false;
      for (let step = 0; step < 10 && app.state?.pending_query; step++) {
        const q = app.state.pending_query;
        if (q.form.kind === "region") {
          const stub = panes.dialog.querySelector(".pruned-stub");
          expect(stub?.textContent).toContain("val = 1/8");
          sawRegionStub = true;
        }
        for (const nodeId of app.state.correct_subtrees) {
          const hidden = panes.tree.querySelector(
            `[data-node-id="${nodeId}"] > .tree-children.hidden`,
          );
          expect(hidden, `node ${nodeId} should start collapsed`).not.toBeNull();
          sawCollapsedCorrect = true;
        }
        const answer = TRUTH[queryKey(q.form)];
        expect(answer, `unexpected query ${queryKey(q.form)}`).toBeDefined();
        const button = panes.dialog.querySelector(
          `.answer-${answer}`,
        ) as HTMLButtonElement;
        expect(button).not.toBeNull();
        button.click();
        await waitForIdle(app);
      }

      expect(sawRegionStub).toBe(true);
      expect(sawCollapsedCorrect).toBe(true);
      expect(app.state?.status).toBe("done");
      expect(app.state?.report?.rules.map((r) => r.id)).toEqual([
        "L ::= B L1 / B.pos",
      ]);
      // Fig. 8 analog: the buggy rule is highlighted in the grammar pane
      const highlight = panes.grammar.querySelector(".buggy-rule mark");
      expect(highlight?.textContent).toContain("B.pos = L.pos + 1;");
    }, 30000);

  it("reconstructs the same view from a bare session id", async () => {
    const panes = makePanes();
    const app = new App(new Client(base), panes);
    await app.start({
      grammar: await fetchAsset("g1_buggy.ag"),
      input: ".101",
    });
    await app.answer("wrong");
    const before = panes.dialog.innerHTML;

    const panes2 = makePanes();
    const app2 = new App(new Client(base), panes2);
    await app2.resume(app.state!.id);
    expect(panes2.dialog.innerHTML).toBe(before);
  }, 30000);

  it("marks a value wrong through the dialog affordance", async () => {
    const panes = makePanes();
    const app = new App(new Client(base), panes);
    await app.start({
      grammar: await fetchAsset("g1_buggy.ag"),
      input: ".101",
    });
    await app.answer("wrong"); // root symptom
    // whatever the next query is, its premise/conclusion rows carry
    // mark-wrong buttons; use the volunteer API directly on B.pos
    await app.markWrong("3.pos");
    const q = app.state?.pending_query;
    expect(q?.form).toEqual({ kind: "slice", target: "2.pos" });
  }, 30000);

  it("diffs two symbol-table values from minisem", async () => {
    const panes = makePanes();
    const app = new App(new Client(base), panes);
    await app.start({
      grammar: await fetchAsset("minisem_fixed.ag"),
      input: "let x = 1 in x + y end",
    });
    const tree = app.state!.tree;
    const envs: { instance: string; text: string }[] = [];
    (function collect(n: typeof tree) {
      for (const item of n.inherited ?? []) {
        if (item.attr === "env" && item.value) {
          envs.push({ instance: item.instance, text: item.value.text });
        }
      }
      for (const c of n.children ?? []) collect(c);
    })(tree);
    const empty = envs.find((e) => e.text === "{}")!;
    const bound = envs.find((e) => e.text.includes("x"))!;
    await app.selectValue(empty.instance);
    await app.selectValue(bound.instance);
    expect(panes.diff.textContent).toContain(".x: added");
  }, 30000);
});

async function waitForIdle(app: App): Promise<void> {
  for (let i = 0; i < 200; i++) {
    await new Promise((r) => setTimeout(r, 10));
    if (!(app as unknown as { busy: boolean }).busy) return;
  }
}
