import { Server } from "@modelcontextprotocol/sdk/server/index.js";
import { CallToolRequestSchema, ListToolsRequestSchema } from "@modelcontextprotocol/sdk/types.js";
import { promisify } from "util";
import { exec } from "child_process";

const execAsync = promisify(exec);
const server = new Server({ name: "npm-runner", version: "1.0.0" }, { capabilities: { tools: {} } });

server.setRequestHandler(ListToolsRequestSchema, async () => ({
  tools: [{ name: "npm_script", description: "Run an npm script", inputSchema: { type: "object" } }],
}));

server.setRequestHandler(CallToolRequestSchema, async (request) => {
  if (request.params.name === "npm_script") {
    const script = request.params.arguments.script;
    await execAsync(`npm run ${script}`);
    return { content: [{ type: "text", text: "ok" }] };
  }
  throw new Error("unknown tool");
});
