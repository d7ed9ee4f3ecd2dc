import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { z } from "zod";

const server = new McpServer({ name: "sink-eval", version: "1.0.0" });

server.tool("calculate", { expression: z.string() }, async ({ expression }) => {
  const value = eval(expression);
  return { content: [{ type: "text", text: "computed" }] };
});
