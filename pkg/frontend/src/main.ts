import { ApiClient } from "./client.js";
import { ChatApp } from "./app.js";

declare global {
  interface Window {
    ISTOD_API_BASE?: string;
    ISTOD_DOMAIN?: string;
  }
}

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? window.ISTOD_API_BASE ?? "http://127.0.0.1:8470";
const domain = params.get("domain") ?? window.ISTOD_DOMAIN ?? "restaurant";

const root = document.getElementById("app");
if (root) {
  const app = new ChatApp(root, new ApiClient(baseUrl), domain);
  void app.start();
}
