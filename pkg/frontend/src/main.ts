import { ApiClient, ApiError } from "./api.js";
import { ProfileFormState } from "./state.js";
import { renderContrastCard, renderError, renderProfileView } from "./render.js";
import type { ModelInfo } from "./types.js";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8000");

const formEl = document.getElementById("profile-form") as HTMLFormElement;
const resultsEl = document.getElementById("results") as HTMLDivElement;
const contrastsEl = document.getElementById("contrasts") as HTMLDivElement;
const contrastForm = document.getElementById("contrast-form") as HTMLFormElement;
const statusEl = document.getElementById("status") as HTMLDivElement;

let state: ProfileFormState;
let model: ModelInfo;

async function init(): Promise<void> {
  try {
    model = await api.getModel();
  } catch (err) {
    statusEl.innerHTML = renderError(
      err instanceof ApiError && err.status === 503
        ? "No model loaded on the service."
        : `Cannot reach the service: ${String(err)}`,
    );
    return;
  }
  state = new ProfileFormState(model.modifiers);
  buildForm();
  buildContrastSelectors();
  await submitProfile();
}

function buildForm(): void {
  formEl.innerHTML = "";
  for (const field of state.fields) {
    const s = field.schema;
    const label = document.createElement("label");
    const hint =
      s.kind === "continuous" && s.min !== undefined
        ? ` (${s.min} to ${s.max})`
        : s.kind === "binary"
          ? " (0/1)"
          : "";
    label.textContent = `${s.name}${hint} `;
    const input = document.createElement("input");
    input.name = s.name;
    input.value = field.raw;
    input.addEventListener("input", () => {
      state.setValue(s.name, input.value);
      input.setCustomValidity(field.error ?? "");
      submitButton().disabled = !state.canSubmit;
    });
    label.appendChild(input);
    formEl.appendChild(label);
  }
  const btn = document.createElement("button");
  btn.type = "submit";
  btn.textContent = "Evaluate profile";
  formEl.appendChild(btn);
  formEl.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submitProfile();
  });
}

function submitButton(): HTMLButtonElement {
  return formEl.querySelector("button") as HTMLButtonElement;
}

async function submitProfile(): Promise<void> {
  if (!state.canSubmit) return;
  const token = state.nextToken();
  statusEl.textContent = "evaluating...";
  try {
    const answer = await api.profile(state.values());
    if (state.isStale(token)) return; // a newer submit superseded this one
    resultsEl.innerHTML = renderProfileView(answer);
    statusEl.textContent = "";
  } catch (err) {
    if (state.isStale(token)) return;
    statusEl.innerHTML = renderError(String(err));
  }
}

function buildContrastSelectors(): void {
  const mk = (name: string): HTMLSelectElement => {
    const sel = document.createElement("select");
    sel.name = name;
    for (const t of model.treatments) {
      const opt = document.createElement("option");
      opt.value = t;
      opt.textContent = `treatment ${t}`;
      sel.appendChild(opt);
    }
    return sel;
  };
  const g = mk("g");
  const gp = mk("g_prime");
  gp.selectedIndex = Math.min(1, model.treatments.length - 1);
  contrastForm.append(g, gp);
  const btn = document.createElement("button");
  btn.type = "submit";
  btn.textContent = "Compare";
  contrastForm.appendChild(btn);
  contrastForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      try {
        const answer = await api.contrast(g.value, gp.value, 0);
        contrastsEl.insertAdjacentHTML("afterbegin", renderContrastCard(answer));
      } catch (err) {
        contrastsEl.insertAdjacentHTML("afterbegin", renderError(String(err)));
      }
    })();
  });
}

void init();
