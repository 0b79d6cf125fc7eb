// Browser client for the review session. Compiled standalone (no modules)
// into public/app.js.

interface InstanceRow {
  instance_id: string;
  talk_id: string;
  language: string;
  label: string;
  arg1_text: string;
  arg2_text: string;
  arg1_clip: string;
  arg2_clip: string;
  review_order: number;
}

interface ProgressRow {
  instance_id: string;
  reviewed: boolean;
  reviewers: string[];
  release_state: string;
}

let instances: InstanceRow[] = [];
let progress: ProgressRow[] = [];
let cursor = 0;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function fetchJson(url: string): Promise<any> {
  const resp = await fetch(url);
  if (!resp.ok) throw new Error(`${url}: ${resp.status}`);
  return resp.json();
}

function audioBlock(clip: string, title: string): string {
  if (!clip) {
    return `<div class="arg-audio"><span class="badge">audio unavailable</span></div>`;
  }
  return `<div class="arg-audio"><audio controls preload="metadata"
      src="/${clip}" title="${title}"></audio></div>`;
}

function render() {
  const row = instances[cursor];
  if (!row) return;
  const prog = progress.find((p) => p.instance_id === row.instance_id);
  el("position").textContent =
    `${cursor + 1} / ${instances.length}` +
    (prog && prog.reviewed ? ` — reviewed by ${prog.reviewers.join(", ")}` : "");
  el("meta").textContent =
    `${row.instance_id}  ·  talk ${row.talk_id}  ·  ${row.language}  ·  label: ${row.label}`;
  el("args").innerHTML =
    `<div class="arg"><span class="tag">Arg1</span>` +
    `<span class="arg1">${escapeHtml(row.arg1_text)}</span>` +
    audioBlock(row.arg1_clip, "Arg1 audio") + `</div>` +
    `<div class="arg"><span class="tag">Arg2</span>` +
    `<span class="arg2">${escapeHtml(row.arg2_text)}</span>` +
    audioBlock(row.arg2_clip, "Arg2 audio") + `</div>`;
  el("state").textContent = prog ? prog.release_state : "";
  (el("fix-fields") as HTMLElement).style.display = "none";
  (el("reject-fields") as HTMLElement).style.display = "none";
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

async function refreshProgress() {
  progress = await fetchJson("/api/progress");
  const reviewed = progress.filter((p) => p.reviewed).length;
  el("summary").textContent = `${reviewed}/${progress.length} reviewed`;
}

async function submit(decision: string) {
  const reviewer = (el<HTMLInputElement>("reviewer")).value.trim();
  if (!reviewer) {
    alert("set a reviewer id first");
    return;
  }
  localStorage.setItem("reviewer_id", reviewer);
  const row = instances[cursor];
  const verdict: any = {
    instance_id: row.instance_id,
    decision,
    reviewer_id: reviewer,
    timestamp: new Date().toISOString(),
  };
  if (decision === "reject") {
    verdict.error_class = (el<HTMLSelectElement>("error-class")).value;
  }
  if (decision === "fix") {
    const nums = ["a1s", "a1e", "a2s", "a2e"].map(
      (id) => parseInt((el<HTMLInputElement>(id)).value, 10) || 0,
    );
    verdict.corrected_spans = [
      [nums[0], nums[1]],
      [nums[2], nums[3]],
    ];
    const fixClass = (el<HTMLSelectElement>("fix-class")).value;
    if (fixClass) verdict.error_class = fixClass;
  }
  const resp = await fetch("/api/verdicts", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(verdict),
  });
  if (!resp.ok) {
    const body = await resp.json();
    alert(`rejected: ${body.error}`);
    return;
  }
  await refreshProgress();
  if (cursor + 1 < instances.length) cursor++;
  render();
}

async function showReport() {
  const report = await fetchJson("/api/report");
  el("report").textContent = JSON.stringify(report, null, 2);
}

async function init() {
  const data = await fetchJson("/api/session");
  instances = data.instances;
  const saved = localStorage.getItem("reviewer_id");
  if (saved) (el<HTMLInputElement>("reviewer")).value = saved;
  await refreshProgress();
  // resume at the first unreviewed instance
  const firstOpen = instances.findIndex((row) => {
    const p = progress.find((q) => q.instance_id === row.instance_id);
    return !p || !p.reviewed;
  });
  cursor = firstOpen >= 0 ? firstOpen : 0;
  render();

  el("prev").onclick = () => { if (cursor > 0) { cursor--; render(); } };
  el("next").onclick = () => {
    if (cursor + 1 < instances.length) { cursor++; render(); }
  };
  el("accept").onclick = () => submit("accept");
  el("reject").onclick = () => {
    (el("reject-fields") as HTMLElement).style.display = "inline-block";
  };
  el("reject-confirm").onclick = () => submit("reject");
  el("fix").onclick = () => {
    (el("fix-fields") as HTMLElement).style.display = "inline-block";
  };
  el("fix-confirm").onclick = () => submit("fix");
  el("show-report").onclick = showReport;
  el("export").onclick = () => { window.location.href = "/api/export"; };
}

window.addEventListener("DOMContentLoaded", init);
