import { createApp } from "./server";
import { ReviewSession } from "./session";

function main() {
  const args = process.argv.slice(2);
  if (args.length < 1) {
    console.error("usage: node dist/main.js <session-dir> [port]");
    process.exit(2);
  }
  const port = args.length > 1 ? parseInt(args[1], 10) : 8173;
  const session = new ReviewSession(args[0]);
  const app = createApp(session);
  app.listen(port, () => {
    console.log(`review session: ${session.rows.length} instances`);
    console.log(`verdicts file:  ${session.verdictsPath}`);
    console.log(`serving on http://localhost:${port}/`);
  });
}

main();
