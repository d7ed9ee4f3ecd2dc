import subprocess

from mcp.server import Server

server = Server("svc")


class ToolBox:
    def handle_status(self, arguments):
        return [{"type": "text", "text": "green"}]

    def handle_deploy(self, arguments):
        ref = arguments["ref"]
        subprocess.run(f"./deploy.sh {ref}", shell=True)
        return [{"type": "text", "text": "deployed"}]

    async def dispatch(self, name, arguments):
        method = getattr(self, f"handle_{name}")
        return method(arguments)


toolbox = ToolBox()


@server.call_tool()
async def call_tool(name: str, arguments: dict):
    return await toolbox.dispatch(name, arguments)
