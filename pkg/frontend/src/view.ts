import {
  DEFAULT_GEOMETRY,
  arIndicatorClass,
  formatProbability,
  formatReward,
  resetMarkers,
  seriesPoints,
  yScale,
} from "./chart.js";
import {
  GAZE_OPTIONS,
  RELIANCE_OPTIONS,
  SCENARIO_PRESETS,
  SessionController,
  type SessionView,
} from "./session.js";
import type { Gaze, Reliance, SessionMetrics } from "./types.js";

const GAZE_LABELS: Record<Gaze, string> = {
  G_road: "Road",
  G_vehi: "Vehicle",
  G_ped: "Pedestrian",
  G_side: "Sidewalk",
  G_oth: "Other",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

export class AppView {
  private root: HTMLElement;
  private gaze: Gaze = "G_road";
  private lastError = "";
  private metrics: SessionMetrics | null = null;
  private autoTimer: number | null = null;

  constructor(
    root: HTMLElement,
    private readonly controller: SessionController,
  ) {
    this.root = root;
    controller.onChange(() => this.render());
    this.render();
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | null> {
    try {
      const result = await work();
      this.lastError = "";
      return result;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.render();
      return null;
    }
  }

  private async tick(reliance: Reliance): Promise<void> {
    await this.guard(async () => {
      if (this.controller.scenarioRunning) {
        await this.controller.scenarioStep(reliance, this.gaze);
        if (!this.controller.scenarioRunning) {
          this.metrics = await this.controller.summary();
        }
      } else {
        await this.controller.step(reliance, this.gaze);
      }
    });
    this.render();
  }

  private toggleAutoAdvance(on: boolean): void {
    if (this.autoTimer !== null) {
      window.clearInterval(this.autoTimer);
      this.autoTimer = null;
    }
    if (on) {
      this.autoTimer = window.setInterval(() => {
        if (this.controller.scenarioRunning) void this.tick("R_plus");
      }, 1000);
    }
  }

  render(): void {
    const view = this.controller.view();
    this.root.replaceChildren(
      this.header(view),
      this.actionPanel(view),
      this.timeline(view),
      this.readouts(view),
      this.controls(view),
      this.scenarioPanel(view),
      this.footer(view),
    );
  }

  private header(view: SessionView): HTMLElement {
    const newSession = el("button", { class: "primary" }, ["New session"]);
    newSession.onclick = () =>
      void this.guard(async () => {
        this.metrics = null;
        await this.controller.start();
        const id = this.controller.view().sessionId;
        if (id) window.location.hash = id;
      });
    const label = view.sessionId
      ? `session ${view.sessionId.slice(0, 8)}…`
      : "no session";
    return el("header", {}, [
      el("h1", {}, ["Supervised drive: trust & workload monitor"]),
      el("div", { class: "session-row" }, [
        el("span", { class: "session-id", "data-role": "session-id" }, [label]),
        newSession,
      ]),
    ]);
  }

  private actionPanel(view: SessionView): HTMLElement {
    const cls = arIndicatorClass(view.lastAction);
    const text =
      view.lastAction === null
        ? "awaiting first step"
        : view.lastAction === "AR_on"
          ? "AR cues ON"
          : "AR cues OFF";
    return el("section", { class: `ar-indicator ${cls}`, "data-role": "ar" }, [
      el("div", { class: "ar-lamp" }),
      el("div", { class: "ar-text" }, [text]),
    ]);
  }

  private timeline(view: SessionView): HTMLElement {
    const g = DEFAULT_GEOMETRY;
    const svgNs = "http://www.w3.org/2000/svg";
    const svg = document.createElementNS(svgNs, "svg");
    svg.setAttribute("viewBox", `0 0 ${g.width} ${g.height}`);
    svg.setAttribute("class", "timeline");
    for (const frac of [0, 0.5, 1]) {
      const line = document.createElementNS(svgNs, "line");
      line.setAttribute("x1", String(g.padLeft));
      line.setAttribute("x2", String(g.width - g.padRight));
      line.setAttribute("y1", String(yScale(frac, g)));
      line.setAttribute("y2", String(yScale(frac, g)));
      line.setAttribute("class", "grid");
      svg.append(line);
      const label = document.createElementNS(svgNs, "text");
      label.setAttribute("x", "4");
      label.setAttribute("y", String(yScale(frac, g) + 4));
      label.setAttribute("class", "axis");
      label.textContent = frac.toFixed(1);
      svg.append(label);
    }
    const draw = (series: number[], cls: string) => {
      if (series.length === 0) return;
      const poly = document.createElementNS(svgNs, "polyline");
      poly.setAttribute("points", seriesPoints(series, g));
      poly.setAttribute("class", cls);
      svg.append(poly);
    };
    draw(view.pTrustHigh, "trust-line");
    draw(view.pWorkloadHigh, "workload-line");
    for (const marker of resetMarkers(
      view.resetSteps,
      view.pTrustHigh.length,
      g,
    )) {
      const flag = document.createElementNS(svgNs, "circle");
      flag.setAttribute("cx", marker.x.toFixed(2));
      flag.setAttribute("cy", (marker.y + 6).toFixed(2));
      flag.setAttribute("r", "4");
      flag.setAttribute("class", "reset-marker");
      const title = document.createElementNS(svgNs, "title");
      title.textContent = "belief reset (observation impossible under model)";
      flag.append(title);
      svg.append(flag);
    }
    const legend = el("div", { class: "legend" }, [
      el("span", { class: "key trust" }, ["P(T_high)"]),
      el("span", { class: "key workload" }, ["P(W_high)"]),
      el("span", { class: "key reset" }, ["belief reset"]),
    ]);
    const section = el("section", { class: "chart" });
    section.append(svg, legend);
    return section;
  }

  private readouts(view: SessionView): HTMLElement {
    const last = view.steps[view.steps.length - 1];
    const cell = (label: string, value: string, role: string) =>
      el("div", { class: "readout" }, [
        el("div", { class: "readout-label" }, [label]),
        el("div", { class: "readout-value", "data-role": role }, [value]),
      ]);
    return el("section", { class: "readouts" }, [
      cell(
        "P(T_high)",
        last ? formatProbability(last.p_trust_high) : "—",
        "p-trust",
      ),
      cell(
        "P(W_high)",
        last ? formatProbability(last.p_workload_high) : "—",
        "p-workload",
      ),
      cell("last reward", last ? formatReward(last.reward) : "—", "reward"),
      cell(
        "discounted return",
        formatReward(view.cumulativeDiscountedReward),
        "return",
      ),
      cell("steps", String(view.steps.length), "steps"),
    ]);
  }

  private controls(view: SessionView): HTMLElement {
    const contextRow = (
      label: string,
      name: "reliability" | "traffic" | "pedestrians",
      options: string[],
    ) => {
      const group = el("div", { class: "option-group" }, [
        el("span", { class: "option-label" }, [label]),
      ]);
      for (const option of options) {
        const btn = el(
          "button",
          {
            class:
              view.context[name] === option ? "option active" : "option",
            "data-context": `${name}:${option}`,
          },
          [option.split("_")[1] ?? option],
        );
        btn.onclick = () => this.controller.setContext({ [name]: option });
        if (view.scenarioRunning) btn.setAttribute("disabled", "true");
        group.append(btn);
      }
      return group;
    };

    const gazeSelect = el("select", { "data-role": "gaze" });
    for (const option of GAZE_OPTIONS) {
      const opt = el("option", { value: option }, [GAZE_LABELS[option]]);
      if (option === this.gaze) opt.setAttribute("selected", "true");
      gazeSelect.append(opt);
    }
    gazeSelect.onchange = () => {
      this.gaze = gazeSelect.value as Gaze;
    };

    const rely = el("button", { class: "act rely", "data-role": "rely" }, [
      "Rely on automation",
    ]);
    rely.onclick = () => void this.tick("R_plus");
    const takeOver = el(
      "button",
      { class: "act takeover", "data-role": "take-over" },
      ["Take over control"],
    );
    takeOver.onclick = () => void this.tick("R_minus");
    if (!view.connected) {
      rely.setAttribute("disabled", "true");
      takeOver.setAttribute("disabled", "true");
    }

    return el("section", { class: "controls" }, [
      el("div", { class: "context-selectors" }, [
        contextRow("Reliability", "reliability", [
          "Rel_low",
          "Rel_mid",
          "Rel_high",
        ]),
        contextRow("Traffic", "traffic", ["Traffic_low", "Traffic_high"]),
        contextRow("Pedestrians", "pedestrians", [
          "Peds_absent",
          "Peds_present",
        ]),
      ]),
      el("div", { class: "human-inputs" }, [
        el("label", {}, ["Gaze target ", gazeSelect]),
        rely,
        takeOver,
      ]),
    ]);
  }

  private scenarioPanel(view: SessionView): HTMLElement {
    const select = el("select", { "data-role": "scenario" });
    for (const preset of SCENARIO_PRESETS) {
      select.append(el("option", { value: preset.name }, [preset.label]));
    }
    const start = el("button", {}, ["Start scenario"]);
    start.onclick = () => {
      const preset = SCENARIO_PRESETS.find((p) => p.name === select.value);
      if (preset) {
        this.metrics = null;
        this.controller.startScenario(preset);
      }
    };
    const pause = el("button", {}, [
      view.scenarioRunning ? "Pause" : "Resume",
    ]);
    pause.onclick = () => {
      if (view.scenarioRunning) this.controller.pauseScenario();
      else this.controller.resumeScenario();
      this.render();
    };
    const auto = el("input", { type: "checkbox", "data-role": "auto" });
    auto.onchange = () => this.toggleAutoAdvance(auto.checked);

    const children: Array<Node | string> = [
      el("h2", {}, ["Scenario player"]),
      el("div", { class: "scenario-row" }, [
        select,
        start,
        pause,
        el("label", { class: "auto-label" }, [auto, " auto-advance 1 Hz"]),
        el("span", { "data-role": "scenario-left" }, [
          view.scenarioRunning || view.scenarioStepsLeft > 0
            ? `${view.scenarioStepsLeft} context steps queued`
            : "",
        ]),
      ]),
    ];
    if (this.metrics) {
      children.push(
        el("div", { class: "summary", "data-role": "summary" }, [
          `run summary — calibration rate ${this.metrics.calibration_rate.toFixed(4)}, ` +
            `transparency-on rate ${this.metrics.transparency_on_rate.toFixed(4)}, ` +
            `discounted return ${formatReward(this.metrics.discounted_return)}, ` +
            `${this.metrics.zero_likelihood_resets} belief resets`,
        ]),
      );
    }
    return el("section", { class: "scenario" }, children);
  }

  private footer(view: SessionView): HTMLElement {
    const parts: Array<Node | string> = [];
    if (this.lastError) {
      parts.push(el("div", { class: "error", "data-role": "error" }, [
        this.lastError,
      ]));
    }
    parts.push(
      el("div", { class: "hint" }, [
        "Every number shown is a verbatim service response; reload restores " +
          "the timeline from the session trace.",
      ]),
    );
    return el("footer", {}, parts);
  }
}
