import { Server } from "@modelcontextprotocol/sdk/server/index.js";
import { CallToolRequestSchema } from "@modelcontextprotocol/sdk/types.js";
import { execSync } from "child_process";

const server = new Server({ name: "two-tools", version: "1.0.0" }, { capabilities: { tools: {} } });

server.setRequestHandler(CallToolRequestSchema, async (request) => {
  const args = request.params.arguments;
  if (request.params.name === "archive_dir") {
    const dir = args.dir;
    execSync(`tar -czf /tmp/archive.tgz ${dir}`);
    return { content: [{ type: "text", text: "archived" }] };
  }
  if (request.params.name === "echo_text") {
    const message = args.message;
    return { content: [{ type: "text", text: message }] };
  }
  throw new Error("unknown tool");
});
