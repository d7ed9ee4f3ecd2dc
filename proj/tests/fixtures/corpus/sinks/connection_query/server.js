import { McpServer } from "@modelcontextprotocol/sdk/server/mcp.js";
import mysql from "mysql2/promise";
import { z } from "zod";

const server = new McpServer({ name: "sink-mysql", version: "1.0.0" });
const connection = await mysql.createConnection({ host: "localhost" });

server.tool("run_report", { table: z.string() }, async ({ table }) => {
  await connection.query("SELECT * FROM " + table);
  return { content: [{ type: "text", text: "reported" }] };
});
