import { ApiClient } from "./api.js";
import { AskViewModel, QueueViewModel } from "./viewmodel.js";
import { LEVEL_DEFINITIONS, type Candidate, type MappingLevel } from "./types.js";

const api = new ApiClient("");
const queue = new QueueViewModel(api);
const ask = new AskViewModel(api);

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function levelBadge(level: MappingLevel | null): HTMLElement {
  const badge = el("span", `badge badge-${level ?? "none"}`, level ?? "–");
  if (level) badge.title = LEVEL_DEFINITIONS[level];
  return badge;
}

function sideCell(label: string | null, code: string, scheme: string): HTMLElement {
  const cell = el("td");
  cell.appendChild(el("div", "label", label ?? "(no label)"));
  cell.appendChild(el("div", "code", `${scheme || "?"} ${code}`));
  return cell;
}

function renderRow(candidate: Candidate): HTMLTableRowElement {
  const row = el("tr", `status-${candidate.status}`);
  row.appendChild(sideCell(candidate.source.label, candidate.source.code, candidate.source.scheme));
  row.appendChild(sideCell(candidate.target.label, candidate.target.code, candidate.target.scheme));

  const levelCell = el("td");
  levelCell.appendChild(levelBadge(candidate.level));
  row.appendChild(levelCell);

  const flags = el("td", "flags");
  const parts: string[] = [];
  if (candidate.approximate) parts.push("approximate");
  if (candidate.no_map) parts.push("no-map");
  if (candidate.combination) parts.push(`combination ${candidate.scenario}/${candidate.choice_list}`);
  flags.textContent = parts.join(", ") || "exact";
  row.appendChild(flags);

  row.appendChild(el("td", "status", candidate.status));

  const reasoning = el("td", "reasoning", candidate.reasoning ?? "");
  row.appendChild(reasoning);

  const actions = el("td", "actions");
  for (const [action, label] of [
    ["accept", "Accept"],
    ["reject", "Reject"],
    ["reset", "Reset"],
  ] as const) {
    const button = el("button", `btn btn-${action}`, label);
    button.addEventListener("click", () => {
      void queue.decide(candidate.id, action).then(renderQueue, renderQueue);
    });
    actions.appendChild(button);
  }
  row.appendChild(actions);
  return row;
}

function renderToasts(): void {
  const host = document.getElementById("toasts")!;
  host.replaceChildren(
    ...queue.toasts.slice(-3).map((t) => el("div", `toast toast-${t.kind}`, t.message)),
  );
}

function renderStats(): void {
  const host = document.getElementById("stats")!;
  const stats = queue.stats;
  if (!stats) {
    host.textContent = "";
    return;
  }
  host.replaceChildren(
    el("span", "stat", `pending ${stats.by_status.pending}`),
    el("span", "stat", `accepted ${stats.by_status.accepted}`),
    el("span", "stat", `rejected ${stats.by_status.rejected}`),
    el("span", "stat", `A ${stats.by_level.A} / B ${stats.by_level.B} / C ${stats.by_level.C}`),
    el("span", "stat", `${stats.decisions_total} decisions`),
  );
}

function renderQueue(): void {
  const banner = document.getElementById("connection")!;
  banner.textContent = queue.connectionError ?? "";
  banner.hidden = !queue.connectionError;

  const body = document.getElementById("queue-body")!;
  if (queue.items.length === 0) {
    const empty = el("tr");
    const cell = el("td", "empty", queue.loading ? "loading…" : "no candidates match");
    cell.colSpan = 7;
    empty.appendChild(cell);
    body.replaceChildren(empty);
  } else {
    body.replaceChildren(...queue.items.map(renderRow));
  }
  document.getElementById("page-label")!.textContent =
    `page ${queue.page} · ${queue.total} total`;
  renderToasts();
  renderStats();
}

function renderAnswer(): void {
  const host = document.getElementById("answer")!;
  host.replaceChildren();
  if (ask.busy) {
    host.appendChild(el("p", "muted", "asking…"));
    return;
  }
  if (ask.failure) {
    host.appendChild(el("p", "error", ask.failure.reason));
    if (ask.failure.attempts.length) {
      const details = el("details");
      if (ask.traceOpen) details.open = true;
      details.appendChild(el("summary", undefined, `trace (${ask.failure.attempts.length} attempts)`));
      details.appendChild(el("pre", undefined, JSON.stringify(ask.failure.attempts, null, 2)));
      host.appendChild(details);
    }
    return;
  }
  const response = ask.response;
  if (!response) return;

  host.appendChild(el("pre", "sparql", response.sparql));
  if (response.boolean !== null) {
    host.appendChild(el("p", undefined, `answer: ${response.boolean}`));
  } else if (response.rows.length === 0) {
    host.appendChild(el("p", "muted", "no results"));
  } else {
    const table = el("table", "result-table");
    const head = el("tr");
    for (const column of response.columns) head.appendChild(el("th", undefined, column));
    table.appendChild(head);
    for (const row of response.rows) {
      const tr = el("tr");
      for (const cell of row) tr.appendChild(el("td", undefined, cell?.value ?? ""));
      table.appendChild(tr);
    }
    host.appendChild(table);
  }
  for (const assessment of response.assessments) {
    const card = el("div", "assessment");
    card.appendChild(levelBadge(assessment.level));
    card.appendChild(
      el("span", undefined,
         ` ${assessment.queried_label} → ${assessment.retrieved_label}: ${assessment.reasoning}`),
    );
    host.appendChild(card);
  }
  if (response.summary) host.appendChild(el("p", "summary", response.summary));
  const details = el("details");
  details.appendChild(el("summary", undefined, `trace (${response.attempts.length} attempts)`));
  details.appendChild(el("pre", undefined, JSON.stringify(response.attempts, null, 2)));
  host.appendChild(details);
}

function wireControls(): void {
  for (const chip of document.querySelectorAll<HTMLButtonElement>("[data-level]")) {
    chip.addEventListener("click", () => {
      const level = (chip.dataset.level || undefined) as MappingLevel | undefined;
      for (const other of document.querySelectorAll("[data-level]")) {
        other.classList.toggle("active", other === chip);
      }
      void queue.setLevelFilter(level).then(renderQueue);
    });
  }
  const statusSelect = document.getElementById("status-filter") as HTMLSelectElement;
  statusSelect.addEventListener("change", () => {
    const value = statusSelect.value as "" | Candidate["status"];
    void queue.setStatusFilter(value || undefined).then(renderQueue);
  });
  document.getElementById("prev")!.addEventListener("click", () => {
    void queue.goToPage(queue.page - 1).then(renderQueue);
  });
  document.getElementById("next")!.addEventListener("click", () => {
    void queue.goToPage(queue.page + 1).then(renderQueue);
  });
  for (const action of ["accept", "reject"] as const) {
    document.getElementById(`bulk-${action}`)!.addEventListener("click", () => {
      const level = queue.filters.level;
      if (!level) {
        queue.pushToast("error", "filter by a level to use bulk actions");
        renderQueue();
        return;
      }
      if (!window.confirm(`Apply ${action} to every pending level-${level} candidate?`)) {
        return;
      }
      void queue.bulkDecide(action)
        .then(() => queue.loadStats())
        .then(renderQueue, renderQueue);
    });
  }
  const reviewerInput = document.getElementById("reviewer") as HTMLInputElement;
  reviewerInput.addEventListener("change", () => {
    queue.reviewer = reviewerInput.value || "expert";
  });
  const form = document.getElementById("ask-form") as HTMLFormElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = document.getElementById("question") as HTMLInputElement;
    ask.question = input.value;
    renderAnswer();
    void ask.ask().then(renderAnswer);
  });
}

async function start(): Promise<void> {
  wireControls();
  await queue.refresh();
  await queue.loadStats();
  renderQueue();
}

void start();
