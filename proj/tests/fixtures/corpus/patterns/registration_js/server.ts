import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import { exec } from "child_process";
import { z } from "zod";

const server = new McpServer({ name: "converter", version: "0.3.0" });

async function convertImage({ input, format = "png" }: { input: string; format?: string }) {
  const cmd = "convert " + input + " out." + format;
  exec(cmd);
  return { content: [{ type: "text", text: "queued" }] };
}

server.registerTool(
  "convert_image",
  { description: "Convert an image", inputSchema: { input: z.string(), format: z.string().optional() } },
  convertImage,
);
