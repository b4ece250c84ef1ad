// Sign-up and login. Registration answers 202 + event id; progress is
// polled from the open event endpoint until the account is usable, so
// the user can log in the moment the registry confirms ("authorized on
// the spot", no approval queue).

import { form, notice, section } from "../components";
import type { AppContext } from "../context";

export function renderRegister(ctx: AppContext): HTMLElement {
  const root = document.createElement("div");
  const progress = document.createElement("div");

  const registerForm = form(
    [
      { name: "hrn", label: "hrn", placeholder: "onelab.r2lab.alice" },
      { name: "email", label: "email", placeholder: "alice@example.org" },
    ],
    "create account",
    async (values) => {
      progress.replaceChildren(notice("registering…"));
      try {
        const accepted = await ctx.api.register(values.hrn, values.email);
        progress.replaceChildren(notice(`event ${accepted.event_id} pending…`));
        const event = await ctx.api.waitEvent(accepted.event_id);
        if (event.status === "success") {
          progress.replaceChildren(notice(`account ${values.hrn} ready; log in below`));
        } else {
          progress.replaceChildren(
            notice(`registration failed: ${event.error?.code}: ${event.error?.message}`, "error"),
          );
        }
      } catch (error) {
        progress.replaceChildren(notice(String(error), "error"));
      }
    },
  );

  const loginForm = form(
    [{ name: "hrn", label: "hrn", placeholder: "onelab.r2lab.alice" }],
    "log in",
    async (values) => {
      try {
        await ctx.api.login(values.hrn);
        await ctx.startSession(values.hrn);
      } catch (error) {
        progress.replaceChildren(notice(`login failed: ${String(error)}`, "error"));
      }
    },
  );

  root.appendChild(section("Create an account", registerForm, progress));
  root.appendChild(section("Log in", loginForm));
  return root;
}
