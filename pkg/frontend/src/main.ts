import { ApiClient } from "./api.js";
import { bootConsole } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const wsBase = location.origin.replace(/^http/, "ws");
  void bootConsole(root, new ApiClient(""), (url) => new WebSocket(url), wsBase);
}
