// Expects the wasm-bindgen output in ./pkg (see the crate README section).
import init, { Demo } from "./pkg/recourse_wasm_demo.js";

const $ = (id) => document.getElementById(id);
let demo;
let features = [];
let sampleIndex = 0;
let lastSuggestion = null;

function readProfile() {
  const p = {};
  for (const f of features) p[f.name] = Number($(`f-${f.name}`).value);
  return p;
}

function writeProfile(p) {
  for (const f of features) $(`f-${f.name}`).value = p[f.name];
}

function verdict(score) {
  const cls = score >= 0.5 ? "approved" : "rejected";
  return `<span class="${cls}">${score.toFixed(4)} (${cls})</span>`;
}

function rescore() {
  try {
    const r = JSON.parse(demo.score(JSON.stringify(readProfile())));
    $("score").innerHTML = verdict(r.score);
  } catch (e) {
    $("score").textContent = `invalid profile: ${e.message}`;
  }
}

let timer;
function scheduleRescore() {
  clearTimeout(timer);
  timer = setTimeout(rescore, 250);
}

function buildForm(schema) {
  features = schema.features;
  for (const f of features) {
    const row = document.createElement("tr");
    const step = f.kind.multiple_of ?? (f.kind === "integer" ? 1 : "any");
    row.innerHTML = `<td>${f.name}</td><td><input type="number" id="f-${f.name}"
      min="${f.lower}" max="${f.upper}" step="${step}" ${f.mutable ? "" : "disabled"}></td>`;
    $(f.mutable ? "mutable" : "immutable").appendChild(row);
    if (f.mutable) row.querySelector("input").addEventListener("input", scheduleRescore);
  }
}

function suggest(method) {
  try {
    const r = JSON.parse(demo.counterfactual(JSON.stringify(readProfile()), method));
    lastSuggestion = r;
    const rows = r.diff
      .map((d) => `<tr><td>${d.feature}</td><td>${d.old}</td><td>${d.delta >= 0 ? "+" : ""}${d.delta}</td><td>${d.new}</td></tr>`)
      .join("");
    $("suggestion").innerHTML = `<p>${r.method}, ${r.elapsed_ms.toFixed(2)} ms</p>
      <table><tr><th>Feature</th><th>Old</th><th>Delta</th><th>New</th></tr>${rows || "<tr><td colspan=4>(no change)</td></tr>"}</table>
      <p>Score ${verdict(r.score_before)} → ${verdict(r.score_after)}</p>`;
    $("apply").hidden = false;
  } catch (e) {
    $("suggestion").textContent = `error: ${e.message}`;
  }
}

function loadSample() {
  writeProfile(JSON.parse(demo.rejectedProfile(sampleIndex++)));
  $("suggestion").textContent = "None yet.";
  $("apply").hidden = true;
  rescore();
}

async function main() {
  await init();
  await new Promise((r) => setTimeout(r, 0));
  const t0 = performance.now();
  demo = new Demo(42n);
  const schema = JSON.parse(demo.schemaJson());
  $("status").textContent =
    `Trained in ${((performance.now() - t0) / 1000).toFixed(1)} s; classifier test accuracy ${schema.test_accuracy.toFixed(3)}.`;
  buildForm(schema);
  $("controls").hidden = false;
  $("sample").onclick = loadSample;
  $("cf-gan").onclick = () => suggest("countergan");
  $("cf-rgd").onclick = () => suggest("rgd");
  $("apply").onclick = () => {
    if (lastSuggestion) writeProfile(lastSuggestion.counterfactual);
    rescore();
  };
  loadSample();
}

main().catch((e) => ($("status").textContent = `failed: ${e.message ?? e}`));
