import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { execSync } from "child_process";
import { z } from "zod";

const server = new McpServer({ name: "batch-runner", version: "1.0.0" });

function withRetries(task: (input: string) => void, input: string) {
  for (let attempt = 0; attempt < 3; attempt++) {
    try {
      return task(input);
    } catch (e) {
      continue;
    }
  }
}

function runStep(step: string) {
  execSync(step);
}

server.tool("run_step", { step: z.string() }, async ({ step }) => {
  withRetries(runStep, step);
  return { content: [{ type: "text", text: "ok" }] };
});
