import { ServiceClient } from "./client.js";
import { SessionController } from "./session.js";
import { AppView } from "./view.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const client = new ServiceClient("");
  const controller = new SessionController(client);
  new AppView(root, controller);

  // a session id in the fragment survives reloads; rebuild from the trace
  const existing = window.location.hash.slice(1);
  if (existing) {
    try {
      await controller.restore(existing);
    } catch {
      window.location.hash = "";
      await controller.start();
    }
  } else {
    await controller.start();
  }
  const sessionId = controller.view().sessionId;
  if (sessionId) {
    window.location.hash = sessionId;
    // live updates pushed by the service (covers steps taken elsewhere,
    // e.g. a batch replay against the same session)
    const source = new EventSource(client.streamUrl(sessionId));
    source.onmessage = (event) => {
      // a push for a step this tab has not seen means the trace moved on
      // (e.g. a batch replay elsewhere); resync from the trace
      const payload = JSON.parse(event.data) as { step_index: number };
      if (payload.step_index >= controller.view().steps.length) {
        void controller.restore(sessionId);
      }
    };
    window.addEventListener("beforeunload", () => source.close());
  }
}

void boot();
