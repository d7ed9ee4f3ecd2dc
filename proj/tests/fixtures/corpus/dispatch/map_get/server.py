import subprocess

from mcp.server import Server

server = Server("net")


def traceroute(arguments):
    dest = arguments.get("dest")
    subprocess.run("traceroute " + dest, shell=True)
    return [{"type": "text", "text": "done"}]


def uptime(arguments):
    return [{"type": "text", "text": "up"}]


TOOL_TABLE = {"traceroute": traceroute, "uptime": uptime}


@server.call_tool()
async def call_tool(name: str, arguments: dict):
    handler = TOOL_TABLE.get(name)
    if handler is None:
        raise ValueError("unknown tool")
    return handler(arguments)
