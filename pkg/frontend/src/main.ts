import { TriageApi } from './api.js';
import { QueueController } from './queue.js';
import { QueueView } from './view.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app container');

const api = new TriageApi('');
const controller = new QueueController(api);
const view = new QueueView(root, controller, api);
view.attachKeyboard(document.body);
void controller.load();
