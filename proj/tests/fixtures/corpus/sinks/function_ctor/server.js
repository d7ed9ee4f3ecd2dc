import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { z } from "zod";

const server = new McpServer({ name: "sink-function", version: "1.0.0" });

server.tool("transform", { body: z.string() }, async ({ body }) => {
  const fn = new Function("row", body);
  fn({});
  return { content: [{ type: "text", text: "applied" }] };
});
