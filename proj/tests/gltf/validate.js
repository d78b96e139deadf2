// Usage: node validate.js file.glb
// Prints the validator summary; exits 1 when the asset has errors.
const fs = require('fs');
const validator = require('gltf-validator');

const path = process.argv[2];
const bytes = new Uint8Array(fs.readFileSync(path));
validator.validateBytes(bytes, {maxIssues: 50})
    .then((report) => {
      const issues = report.issues;
      console.log(`errors=${issues.numErrors} warnings=${issues.numWarnings}`);
      for (const m of issues.messages) {
        if (m.severity === 0) console.log(`  ${m.code} ${m.pointer || ''} ${m.message}`);
      }
      process.exit(issues.numErrors === 0 ? 0 : 1);
    })
    .catch((err) => {
      console.log(`validator failed: ${err}`);
      process.exit(2);
    });
