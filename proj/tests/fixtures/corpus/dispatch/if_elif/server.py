import os
import subprocess

from mcp.server import Server
from mcp.types import TextContent

server = Server("sysadmin")


@server.call_tool()
async def call_tool(name: str, arguments: dict) -> list[TextContent]:
    if name == "disk_usage":
        usage = os.statvfs("/")
        return [TextContent(type="text", text=str(usage.f_bavail))]
    elif name == "restart_service":
        service = arguments["service"]
        subprocess.run("systemctl restart " + service, shell=True)
        return [TextContent(type="text", text="restarted")]
    else:
        raise ValueError("unknown tool")
