// Typed client for the agdebug session service.  The UI holds no debugging
// logic of its own: every user action is exactly one call here.

export interface WireValue {
  sort: string;
  text: string;
}

export interface InstanceValue {
  instance: string;
  attr: string;
  value: WireValue | null;
}

export interface BoundaryItem extends InstanceValue {
  node: number;
  symbol: string;
}

export interface TreeNode {
  id: number;
  symbol: string;
  terminal?: boolean;
  stub?: boolean;
  production?: string | null;
  inherited?: InstanceValue[];
  synthesized?: InstanceValue[];
  children?: TreeNode[];
}

export interface QueryForm {
  kind: "synth" | "region" | "slice";
  node?: number;
  root?: number;
  pruned?: number[];
  target?: string;
}

export interface PendingQuery {
  fingerprint: string;
  form: QueryForm;
  premise: BoundaryItem[];
  conclusion: BoundaryItem[];
  symptom_check: boolean;
  display_tree: TreeNode | null;
}

export interface Span {
  line: number;
  col: number;
  end_line: number;
  end_col: number;
}

export interface RuleRef {
  id: string;
  span: Span;
}

export interface Report {
  candidates: string[];
  rules: RuleRef[];
  queries_asked: number;
  terminated_by: string;
}

export interface SessionState {
  id: string;
  status: "awaiting_answer" | "done";
  strategy: string;
  epsilon: number;
  input: string;
  grammar: { source: string; rules: RuleRef[] };
  evaluation: {
    status: string;
    fault: { comp: string; kind: string; message: string } | null;
  };
  tree: TreeNode;
  pending_query: PendingQuery | null;
  report: Report | null;
  queries_asked: number;
  correct_subtrees: number[];
}

export interface DiffEdit {
  path: string;
  kind: "added" | "removed" | "changed";
  a: string | null;
  b: string | null;
}

export interface DiffReport {
  a: { instance: string; value: WireValue | null };
  b: { instance: string; value: WireValue | null };
  equal: boolean;
  edits: DiffEdit[];
}

export type AnswerKind = "correct" | "wrong" | "skip" | "abort";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function check<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let message = res.statusText;
    try {
      const body = await res.json();
      message = body?.error?.message ?? message;
    } catch {
      // keep the status text
    }
    throw new ApiError(res.status, message);
  }
  return (await res.json()) as T;
}

export class Client {
  constructor(private base: string) {}

  createSession(body: {
    grammar: string;
    input: string;
    strategy?: string;
    epsilon?: number;
  }): Promise<SessionState> {
    return fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => check<SessionState>(r));
  }

  getSession(id: string): Promise<SessionState> {
    return fetch(`${this.base}/sessions/${id}`).then((r) =>
      check<SessionState>(r),
    );
  }

  answer(
    id: string,
    answer: AnswerKind,
    fingerprint: string,
  ): Promise<SessionState> {
    return fetch(`${this.base}/sessions/${id}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answer, fingerprint }),
    }).then((r) => check<SessionState>(r));
  }

  volunteer(id: string, instance: string): Promise<SessionState> {
    return fetch(`${this.base}/sessions/${id}/volunteer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ instance }),
    }).then((r) => check<SessionState>(r));
  }

  diff(id: string, a: string, b: string): Promise<DiffReport> {
    const params = new URLSearchParams({ a, b });
    return fetch(`${this.base}/sessions/${id}/diff?${params}`).then((r) =>
      check<DiffReport>(r),
    );
  }
}
