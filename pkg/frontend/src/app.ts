/**
 * Panel wiring: DOM controls on the left, live canvases on the right.
 *
 * The panel performs no limit clamping of its own; every command goes to
 * the service as-is and rejections (unreachable, limit_violation, ...)
 * are shown inline. Only the stop button stays enabled during moves.
 */

import { Geometry } from "./fk.js";
import { UiStore } from "./model.js";
import { drawSideView, drawTopView } from "./render.js";
import {
  DescriptionInfo,
  makeGotoPose,
  makeGripper,
  makeHome,
  makeJog,
  makeStop,
} from "./schema.js";
import { TeleopSocket } from "./socket.js";

const NUDGE_M = 0.01;
const NUDGE_PITCH = 0.1;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function serviceBase(): string {
  const override = new URLSearchParams(location.search).get("server");
  return override ?? location.host;
}

async function boot(): Promise<void> {
  const base = serviceBase();
  const described: DescriptionInfo = await (await fetch(`http://${base}/description`)).json();
  const geo: Geometry = described.geometry;
  const store = new UiStore();

  const sideCtx = el<HTMLCanvasElement>("side-view").getContext("2d")!;
  const topCtx = el<HTMLCanvasElement>("top-view").getContext("2d")!;
  const banner = el<HTMLDivElement>("banner");
  const ageLabel = el<HTMLSpanElement>("age");
  const poseLabel = el<HTMLDivElement>("pose");
  const rejection = el<HTMLDivElement>("rejection");

  let dirty = false;
  const repaint = () => {
    if (dirty && store.latest) {
      drawSideView(sideCtx, store.latest, geo);
      drawTopView(topCtx, store.latest, geo);
      dirty = false;
    }
    requestAnimationFrame(repaint);
  };
  requestAnimationFrame(repaint);

  const socket = new TeleopSocket(`ws://${base}/ws`, {
    onState: (state) => {
      if (!store.accept(state)) return;
      dirty = true;
      const p = state.pose;
      poseLabel.textContent =
        `x ${p.x.toFixed(3)}  y ${p.y.toFixed(3)}  z ${p.z.toFixed(3)}  ` +
        `pitch ${p.pitch.toFixed(3)}  [${state.mode}]`;
      refreshEnabled();
    },
    onAck: (ack) => {
      store.acceptAck(ack);
      rejection.textContent = store.lastRejection
        ? `rejected: ${store.lastRejection.code} ${store.lastRejection.detail}`
        : "";
    },
    onStatus: (status) => {
      banner.dataset.status = store.faulted() ? "fault" : status;
      banner.textContent = status === "connected" && store.faulted() ? "FAULT" : status;
      refreshEnabled();
    },
  });
  socket.connect();

  setInterval(() => {
    const age = socket.ageMs();
    ageLabel.textContent = age === null ? "no data" : `${Math.round(age)} ms`;
    if (store.faulted() && socket.currentStatus() === "connected") {
      banner.dataset.status = "fault";
      banner.textContent = `FAULT: ${store.latest?.fault ?? ""}`;
    }
  }, 100);

  const motionButtons: HTMLButtonElement[] = [];
  const refreshEnabled = () => {
    const enabled = socket.currentStatus() === "connected" && store.motionControlsEnabled();
    for (const button of motionButtons) button.disabled = !enabled;
  };

  const send = (command: Parameters<typeof socket.send>[0]) => {
    store.clearRejection();
    rejection.textContent = "";
    if (!socket.send(command)) rejection.textContent = "not connected";
  };

  // Joint jog rows.
  const jogTable = el<HTMLDivElement>("jog-rows");
  described.joints.forEach((joint, index) => {
    const row = document.createElement("div");
    row.className = "row";
    const label = document.createElement("span");
    label.textContent = `${index + 1} ${joint.name}`;
    const minus = document.createElement("button");
    minus.textContent = "−";
    minus.onclick = () => send(makeJog(index + 1, -store.jogStep));
    const plus = document.createElement("button");
    plus.textContent = "+";
    plus.onclick = () => send(makeJog(index + 1, store.jogStep));
    motionButtons.push(minus, plus);
    row.append(minus, label, plus);
    jogTable.append(row);
  });

  const stepSelect = el<HTMLSelectElement>("jog-step");
  stepSelect.onchange = () => {
    store.jogStep = parseInt(stepSelect.value, 10);
  };

  // Cartesian nudges relative to the latest reported pose.
  const nudges: Array<[string, number, number, number, number]> = [
    ["x−", -NUDGE_M, 0, 0, 0],
    ["x+", NUDGE_M, 0, 0, 0],
    ["y−", 0, -NUDGE_M, 0, 0],
    ["y+", 0, NUDGE_M, 0, 0],
    ["z−", 0, 0, -NUDGE_M, 0],
    ["z+", 0, 0, NUDGE_M, 0],
    ["pitch−", 0, 0, 0, -NUDGE_PITCH],
    ["pitch+", 0, 0, 0, NUDGE_PITCH],
  ];
  const nudgeBox = el<HTMLDivElement>("nudges");
  for (const [label, dx, dy, dz, dpitch] of nudges) {
    const button = document.createElement("button");
    button.textContent = label;
    button.onclick = () => {
      const p = store.latest?.pose;
      if (!p) return;
      send(makeGotoPose(p.x + dx, p.y + dy, p.z + dz, p.pitch + dpitch));
    };
    motionButtons.push(button);
    nudgeBox.append(button);
  }

  // Gripper slider spans the calibrated width range; the service validates.
  const slider = el<HTMLInputElement>("gripper");
  slider.min = String(described.gripper.width_closed_m);
  slider.max = String(described.gripper.width_open_m);
  slider.step = "0.001";
  const gripLabel = el<HTMLSpanElement>("gripper-label");
  slider.oninput = () => {
    gripLabel.textContent = `${(parseFloat(slider.value) * 1000).toFixed(0)} mm`;
  };
  slider.onchange = () => send(makeGripper(parseFloat(slider.value)));

  el<HTMLButtonElement>("home").onclick = () => send(makeHome());
  const homeButton = el<HTMLButtonElement>("home");
  motionButtons.push(homeButton);
  // Stop is deliberately NOT in motionButtons: always enabled.
  el<HTMLButtonElement>("stop").onclick = () => send(makeStop());

  refreshEnabled();
}

boot().catch((err) => {
  document.body.textContent = `panel failed to start: ${err}`;
});
