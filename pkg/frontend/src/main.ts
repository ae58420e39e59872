import { WorkbenchApp } from "./app.js";
import { Channel } from "./transport.js";
import { SocketLike } from "./transport.js";

const url = `ws://${window.location.host}/ws`;
const channel = new Channel((u) => new WebSocket(u) as unknown as SocketLike);
const app = new WorkbenchApp(document.getElementById("app")!, channel);

app.start(url).catch((error) => {
  document.getElementById("app")!.textContent = `failed to start: ${error}`;
});
