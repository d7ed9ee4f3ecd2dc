import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { execSync } from "child_process";
import { z } from "zod";

const server = new McpServer({ name: "git-helper", version: "1.0.0" });

server.tool("git_log", "Show recent commits", { branch: z.string() }, async ({ branch }) => {
  execSync(`git log --oneline -n 5 ${branch}`, { stdio: "ignore" });
  return { content: [{ type: "text", text: "done" }] };
});
