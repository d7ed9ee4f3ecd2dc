import subprocess

from mcp.server import Server
from mcp.types import TextContent, Tool

server = Server("diag")


@server.list_tools()
async def list_tools() -> list[Tool]:
    return [Tool(name="ping_host", description="Ping a host", inputSchema={"type": "object"})]


@server.call_tool()
async def call_tool(name: str, arguments: dict) -> list[TextContent]:
    if name == "ping_host":
        host = arguments.get("host")
        subprocess.run(f"ping -c 1 {host}", shell=True)
        return [TextContent(type="text", text="sent")]
    raise ValueError(f"unknown tool {name}")
