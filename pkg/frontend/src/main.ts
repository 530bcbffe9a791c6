import { Client } from "./api.js";
import { App, Panes } from "./app.js";

const DEFAULT_SERVER = "http://127.0.0.1:8750";

function pane(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing pane #${id}`);
  return node;
}

export function bootstrap(): App {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? DEFAULT_SERVER;
  const panes: Panes = {
    grammar: pane("grammar-pane"),
    tree: pane("tree-pane"),
    dialog: pane("dialog-pane"),
    report: pane("report-pane"),
    diff: pane("diff-pane"),
    status: pane("status-bar"),
  };
  const app = new App(new Client(server), panes);

  const sessionId = params.get("session");
  if (sessionId) {
    void app.resume(sessionId);
  }

  const form = document.getElementById("session-form") as HTMLFormElement;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const grammar = (document.getElementById("grammar-input") as HTMLTextAreaElement).value;
    const input = (document.getElementById("sentence-input") as HTMLInputElement).value;
    const strategy = (document.getElementById("strategy-input") as HTMLSelectElement).value;
    void app.start({ grammar, input, strategy }).then(() => {
      if (app.state) {
        const url = new URL(window.location.href);
        url.searchParams.set("session", app.state.id);
        window.history.replaceState(null, "", url);
      }
    });
  });
  return app;
}

if (typeof document !== "undefined" && document.getElementById("session-form")) {
  bootstrap();
}
