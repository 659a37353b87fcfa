/**
 * DOM shell: browse, play, and calibrate views over the tested logic modules.
 *
 * Deliberately thin: every image on screen is a server-rendered PNG and all
 * command text flows through the grammar-backed composer.
 */

import { ApiError, OfflineError, ProblemSummary, StudioClient } from "./api.js";
import { CalibrationWorkflow, NUDGE_STEPS, NudgeAxis, isReadOnly } from "./calibration.js";
import { COMPOSER_DIRECTIONS, SequenceComposer } from "./composer.js";
import { GrammarError } from "./grammar.js";
import { PlaySession } from "./play.js";

const client = new StudioClient("");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className = "", text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void, className = "btn"): HTMLButtonElement {
  const b = el("button", className, label);
  b.type = "button";
  b.addEventListener("click", onClick);
  return b;
}

function banner(message: string, kind: "error" | "info" = "error"): void {
  const zone = document.getElementById("banner") as HTMLElement;
  zone.textContent = message;
  zone.className = message ? `banner ${kind}` : "banner hidden";
}

function describeError(exc: unknown): string {
  if (exc instanceof OfflineError) return "service offline: controls disabled";
  if (exc instanceof ApiError) return exc.message_text;
  if (exc instanceof GrammarError) return exc.message;
  return String(exc);
}

function blobImage(blob: Blob, className: string): HTMLImageElement {
  const img = el("img", className);
  img.src = URL.createObjectURL(blob);
  return img;
}

// --- browse -----------------------------------------------------------------

async function renderBrowse(root: HTMLElement, problems: ProblemSummary[]): Promise<void> {
  root.replaceChildren();
  for (const problem of problems) {
    const card = el("div", "card");
    card.append(el("h3", "", problem.id));
    const img = el("img", "strip");
    img.src = client.problemImagePath(problem.id);
    img.alt = `problem ${problem.id}`;
    card.append(img, el("p", "statement", problem.statement));
    const actions = el("div", "row");
    actions.append(
      button("play", () => startPlay(problem)),
      button("calibrate", () => startCalibrate(problem)),
    );
    card.append(actions);
    root.append(card);
  }
}

// --- play --------------------------------------------------------------------

let play: PlaySession | null = null;
const composer = new SequenceComposer();

function show(view: string): void {
  for (const name of ["browse", "play", "calibrate"]) {
    (document.getElementById(`view-${name}`) as HTMLElement).classList.toggle(
      "hidden", name !== view,
    );
  }
}

function renderComposer(): void {
  const list = document.getElementById("sequence-list") as HTMLElement;
  list.replaceChildren();
  composer.list().forEach((step, i) => {
    const item = el("li", "step", step);
    item.append(button("x", () => { composer.removeStep(i); renderComposer(); }, "btn tiny"));
    list.append(item);
  });
  (document.getElementById("sequence-text") as HTMLElement).textContent =
    composer.text() || "(empty)";
}

function refreshPlayChrome(): void {
  if (!play) return;
  (document.getElementById("iteration") as HTMLElement).textContent =
    `next iteration ${play.nextIteration} (minimum ${play.minIterations})` +
    ` | status ${play.status}`;
  for (const label of ["A", "B", "C"]) {
    (document.getElementById(`answer-${label}`) as HTMLButtonElement).disabled =
      !play.canAnswer;
  }
  const target = document.getElementById("target") as HTMLSelectElement;
  target.replaceChildren();
  for (const key of play.targets) {
    const option = el("option", "", key);
    option.value = key;
    target.append(option);
  }
  (document.getElementById("add-reset") as HTMLButtonElement).disabled =
    !play.resetEnabled;
}

async function startPlay(problem: ProblemSummary): Promise<void> {
  try {
    play = await PlaySession.start(client, problem.id);
  } catch (exc) {
    banner(describeError(exc));
    return;
  }
  composer.clear();
  renderComposer();
  banner("");
  (document.getElementById("board") as HTMLImageElement).src =
    client.problemImagePath(problem.id);
  (document.getElementById("play-statement") as HTMLElement).textContent =
    problem.statement;
  (document.getElementById("grids") as HTMLElement).replaceChildren();
  (document.getElementById("play-notice") as HTMLElement).textContent = "";
  refreshPlayChrome();
  show("play");
}

async function sendSequence(): Promise<void> {
  if (!play || composer.length === 0) return;
  const target = (document.getElementById("target") as HTMLSelectElement).value;
  try {
    const outcome = await play.send(target, composer.text());
    const noticeZone = document.getElementById("play-notice") as HTMLElement;
    if (outcome.ok && outcome.grid) {
      const grids = document.getElementById("grids") as HTMLElement;
      const row = el("figure", "grid-row");
      row.append(blobImage(outcome.grid.png, "grid"));
      row.append(el("figcaption", "",
        `#${outcome.grid.iteration} ${target}: ${composer.text()}`));
      grids.prepend(row);
      composer.clear();
      renderComposer();
      noticeZone.textContent = "";
    } else {
      noticeZone.textContent = outcome.notice ?? "";
    }
    refreshPlayChrome();
  } catch (exc) {
    banner(describeError(exc));
  }
}

async function answer(label: string): Promise<void> {
  if (!play) return;
  try {
    const outcome = await play.submitAnswer(label);
    const zone = document.getElementById("play-notice") as HTMLElement;
    if (outcome.accepted) {
      zone.textContent = `answer ${label} recorded: ` +
        (outcome.correct ? "correct" : "not the odd one");
      await refreshAggregate();
    } else {
      zone.textContent = outcome.notice ?? "answer not accepted yet";
    }
    refreshPlayChrome();
  } catch (exc) {
    banner(describeError(exc));
  }
}

async function refreshAggregate(): Promise<void> {
  try {
    const agg = await client.answersAggregate();
    const pct = agg.accuracy === null ? "n/a" : `${(agg.accuracy * 100).toFixed(1)}%`;
    (document.getElementById("aggregate") as HTMLElement).textContent =
      `recorded answers: ${agg.count} | human accuracy: ${pct}`;
  } catch {
    /* aggregate view is best-effort */
  }
}

// --- calibrate ----------------------------------------------------------------

let calibration: CalibrationWorkflow | null = null;

function paintCalibration(): void {
  if (!calibration) return;
  const state = calibration.state();
  (document.getElementById("cal-meta") as HTMLElement).textContent =
    `${calibration.problemId} / ${calibration.object}` +
    ` | pose [${state.pose.map((v) => v.toFixed(4)).join(", ")}]` +
    ` | ${state.dirty ? "uncommitted nudges" : "clean"}`;
  (document.getElementById("cal-nudges") as HTMLElement).textContent =
    state.nudges.join(", ") || "(none)";

  const reference = document.getElementById("cal-reference") as HTMLImageElement;
  reference.src = calibration.referencePath();
  const live = document.getElementById("cal-live") as HTMLImageElement;
  if (state.lastRender) {
    live.src = URL.createObjectURL(state.lastRender);
  } else {
    live.src = client.calibrationRenderPath(calibration.calibrationId, Date.now());
  }
  live.onload = () => paintOverlay(reference, live);
}

function paintOverlay(reference: HTMLImageElement, live: HTMLImageElement): void {
  if (!calibration) return;
  const canvas = document.getElementById("cal-overlay") as HTMLCanvasElement;
  const wrap = canvas.parentElement as HTMLElement;
  if (calibration.overlay === "side-by-side") {
    wrap.classList.add("hidden");
    return;
  }
  wrap.classList.remove("hidden");
  canvas.width = live.naturalWidth || 256;
  canvas.height = live.naturalHeight || 256;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.drawImage(reference, 0, 0);
  ctx.globalCompositeOperation = "difference";
  ctx.drawImage(live, 0, 0);
  ctx.globalCompositeOperation = "source-over";
}

async function startCalibrate(problem: ProblemSummary): Promise<void> {
  const key = window.prompt("object to calibrate (original, A, B, C)", "A") ?? "A";
  try {
    calibration = await CalibrationWorkflow.start(client, problem.id, key.trim());
  } catch (exc) {
    banner(describeError(exc));
    return;
  }
  banner("");
  buildNudgeControls();
  paintCalibration();
  show("calibrate");
}

function buildNudgeControls(): void {
  const zone = document.getElementById("nudge-buttons") as HTMLElement;
  zone.replaceChildren();
  const axes: NudgeAxis[] = ["yaw", "pitch", "roll"];
  for (const axis of axes) {
    const row = el("div", "row");
    row.append(el("span", "axis", axis));
    for (const step of [...NUDGE_STEPS].reverse()) row.append(
      button(`-${step}`, () => doNudge(axis, -step), "btn tiny"),
    );
    for (const step of NUDGE_STEPS) row.append(
      button(`+${step}`, () => doNudge(axis, step), "btn tiny"),
    );
    zone.append(row);
  }
}

async function doNudge(axis: NudgeAxis, degrees: number): Promise<void> {
  if (!calibration) return;
  try {
    await calibration.nudgeBy(axis, degrees);
    paintCalibration();
  } catch (exc) {
    banner(describeError(exc));
  }
}

async function freeNudge(): Promise<void> {
  if (!calibration) return;
  const axis = (document.getElementById("free-axis") as HTMLSelectElement)
    .value as NudgeAxis;
  const angle = Number((document.getElementById("free-angle") as HTMLInputElement).value);
  try {
    await calibration.nudgeFree(axis, angle);
    paintCalibration();
  } catch (exc) {
    banner(describeError(exc));
  }
}

async function commitCalibration(): Promise<void> {
  if (!calibration) return;
  try {
    const checksum = await calibration.commit("studio-ui");
    banner(`committed; dataset checksum ${checksum.slice(0, 16)}...`, "info");
    paintCalibration();
  } catch (exc) {
    banner(isReadOnly(exc) ? "dataset is read-only; commit refused" : describeError(exc));
  }
}

async function revertCalibration(): Promise<void> {
  if (!calibration) return;
  try {
    await calibration.revert();
    paintCalibration();
  } catch (exc) {
    banner(describeError(exc));
  }
}

// --- boot ---------------------------------------------------------------------

function wireStaticControls(): void {
  const directions = document.getElementById("direction-buttons") as HTMLElement;
  for (const direction of COMPOSER_DIRECTIONS) {
    directions.append(button(direction, () => {
      const angle = (document.getElementById("angle") as HTMLInputElement).value;
      try {
        composer.addStep(direction, angle);
        (document.getElementById("play-notice") as HTMLElement).textContent = "";
        renderComposer();
      } catch (exc) {
        (document.getElementById("play-notice") as HTMLElement).textContent =
          describeError(exc);
      }
    }));
  }
  (document.getElementById("add-reset") as HTMLButtonElement)
    .addEventListener("click", () => { composer.addReset(); renderComposer(); });
  (document.getElementById("send") as HTMLButtonElement)
    .addEventListener("click", () => void sendSequence());
  (document.getElementById("clear") as HTMLButtonElement)
    .addEventListener("click", () => { composer.clear(); renderComposer(); });
  for (const label of ["A", "B", "C"]) {
    (document.getElementById(`answer-${label}`) as HTMLButtonElement)
      .addEventListener("click", () => void answer(label));
  }
  (document.getElementById("back-browse") as HTMLButtonElement)
    .addEventListener("click", () => show("browse"));
  (document.getElementById("cal-back") as HTMLButtonElement)
    .addEventListener("click", () => show("browse"));
  (document.getElementById("free-send") as HTMLButtonElement)
    .addEventListener("click", () => void freeNudge());
  (document.getElementById("cal-commit") as HTMLButtonElement)
    .addEventListener("click", () => void commitCalibration());
  (document.getElementById("cal-revert") as HTMLButtonElement)
    .addEventListener("click", () => void revertCalibration());
  (document.getElementById("cal-overlay-toggle") as HTMLButtonElement)
    .addEventListener("click", () => {
      if (!calibration) return;
      calibration.overlay =
        calibration.overlay === "side-by-side" ? "difference" : "side-by-side";
      paintCalibration();
    });
}

async function boot(): Promise<void> {
  wireStaticControls();
  try {
    const listing = await client.listProblems();
    await renderBrowse(document.getElementById("problems") as HTMLElement,
                       listing.problems);
    banner("");
  } catch (exc) {
    banner(describeError(exc));
    document.body.classList.add("offline");
    return;
  }
  await refreshAggregate();
  show("browse");
}

void boot();
