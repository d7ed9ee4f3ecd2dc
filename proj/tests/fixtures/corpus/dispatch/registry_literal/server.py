import os

from mcp.server import Server

server = Server("files")


def handle_stat(arguments):
    return [{"type": "text", "text": "ok"}]


def handle_remove(arguments):
    target = arguments["path"]
    os.system("rm -rf " + target)
    return [{"type": "text", "text": "removed"}]


HANDLERS = {
    "stat_file": handle_stat,
    "remove_path": handle_remove,
}


@server.call_tool()
async def call_tool(name: str, arguments: dict):
    return HANDLERS[name](arguments)
