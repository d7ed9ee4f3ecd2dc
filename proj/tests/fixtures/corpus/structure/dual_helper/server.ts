import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { execSync } from "child_process";
import { z } from "zod";

const server = new McpServer({ name: "formatter", version: "1.0.0" });

function prettierCommand(file: string) {
  return `npx prettier --write ${file}`;
}

function eslintCommand(file: string) {
  return `npx eslint --fix ${file}`;
}

server.tool("format_file", { file: z.string(), lint: z.boolean() }, async ({ file, lint }) => {
  let command = prettierCommand(file);
  if (lint) {
    command = eslintCommand(file);
  }
  execSync(command);
  return { content: [{ type: "text", text: "formatted" }] };
});
